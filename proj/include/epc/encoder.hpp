#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "epc/numcore.hpp"
#include "epc/pointcloud.hpp"

namespace epc {

inline constexpr std::size_t kEncoderInputDim = 9;

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Per-point MLP: in -> hidden -> hidden -> out, ReLU between layers.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::size_t num_params() const;

  /// Weights then bias for each layer, row-major.
  std::vector<double> flatten() const;
  /// Inverse of flatten(); shapes are taken from *this.
  MlpParams with_values(std::span<const double> flat) const;
  MlpParams zeros_like() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per layer
  std::vector<Matrix> activations;      // ReLU outputs of the hidden layers
};

MlpParams encoder_init(std::size_t d_in, std::size_t hidden, std::size_t c_out, std::uint64_t seed);

/// N x 9 features: centroid-centered xyz divided by the largest bounding-box
/// extent, per-point rgb, scene-mean rgb.
Matrix encoder_features(const PointCloud& cloud);

Matrix mlp_forward(const MlpParams& params, const Matrix& input, ForwardCache* cache = nullptr);
Matrix encoder_forward(const MlpParams& params, const PointCloud& cloud,
                       ForwardCache* cache = nullptr);

/// Parameter gradients for an upstream gradient on the embedding.
MlpParams encoder_backward(const MlpParams& params, const ForwardCache& cache,
                           const Matrix& grad_embedding);

/// EPCK checkpoint: "EPCK" | u32 version | u32 layers |
/// per layer: u32 in, u32 out, in*out f64 weights, out f64 biases.
std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params);
MlpParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the encoded checkpoint.
std::uint64_t checkpoint_hash(const MlpParams& params);

}  // namespace epc
