#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epc/encoder.hpp"
#include "epc/losses.hpp"
#include "epc/pointcloud.hpp"
#include "epc/superpoint.hpp"

namespace epc {

struct SyntheticSceneConfig {
  std::size_t num_clusters = 8;
  std::size_t points_per_cluster = 128;
  double cluster_std = 0.4;      // meters
  double color_noise_std = 0.12;
  double room_extent = 8.0;      // meters, cube side
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cluster centers uniform in the room, Gaussian points around them. Each
/// class id has a fixed base color shared by every scene, so labels carry the
/// same meaning across scenes. Label = cluster id.
PointCloud generate_scene(const SyntheticSceneConfig& cfg, Rng& stream);

/// `count` scenes, scene k drawn from sub-stream k of cfg.seed.
std::vector<PointCloud> generate_scenes(const SyntheticSceneConfig& cfg, std::size_t count);

/// Base color of a class id (deterministic, independent of any seed).
std::array<double, 3> class_base_color(std::size_t class_id);

enum class LrSchedule { kConstant, kCosine };

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static OptimState zeros(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n), 0}; }
};

struct AdamResult {
  std::vector<double> params;
  OptimState state;
};

/// Bias-corrected adaptive-moment update on flat parameter vectors.
AdamResult adam_step(std::span<const double> params, std::span<const double> grads,
                     const OptimState& state, double lr, const AdamHyper& hp = {});

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 1;  // scenes per optimizer step
  double base_lr = 0.01;
  LrSchedule lr_schedule = LrSchedule::kCosine;
  AdamHyper adam;
  LossKind loss_kind = LossKind::kEP;
  LossConfig loss;
  AugmentParams augment;
  std::size_t hidden = 64;
  std::size_t embed_dim = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

struct HistoryRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct PretrainResult {
  MlpParams initial;
  MlpParams params;
  std::vector<HistoryRow> history;
};

/// Optional per-step observer (progress reporting).
using StepCallback = std::function<void(const HistoryRow&)>;

/// Segments are computed once per scene from the un-augmented cloud and
/// shared by both views.
PretrainResult pretrain(const std::vector<PointCloud>& scenes, const TrainConfig& cfg,
                        const KMeansConfig& kmeans, const StepCallback& on_step = {});

/// Same, starting from the given parameters.
PretrainResult pretrain_from(const MlpParams& init, const std::vector<PointCloud>& scenes,
                             const TrainConfig& cfg, const KMeansConfig& kmeans,
                             const StepCallback& on_step = {});

/// "step,epoch,loss,lr" header plus one row per step.
std::string history_csv(const std::vector<HistoryRow>& history);

struct ProbeConfig {
  double label_fraction = 1.0;  // fraction of training points whose labels are used
  std::size_t iterations = 300;
  double lr = 0.5;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t train_points = 0;
  std::size_t test_points = 0;
  std::vector<std::uint32_t> absent_classes;  // classes never seen during probe training
  std::vector<std::string> warnings;
};

/// Multinomial logistic regression on standardized embeddings.
struct LinearClassifier {
  Matrix weight;  // features x classes
  Matrix bias;    // 1 x classes
  std::vector<double> mean, inv_std;
  std::vector<char> active;  // classes present in training

  std::vector<std::uint32_t> predict(const Matrix& features) const;
};

LinearClassifier fit_linear_classifier(const Matrix& features,
                                       std::span<const std::uint32_t> labels,
                                       std::size_t num_classes, const ProbeConfig& cfg);

/// Point-wise accuracy of a probe trained on frozen embeddings of the
/// training scenes and evaluated on the held-out scenes.
ProbeResult linear_probe(const MlpParams& params, const std::vector<PointCloud>& train_scenes,
                         const std::vector<PointCloud>& test_scenes, const ProbeConfig& cfg);

/// Same, on precomputed per-point features.
ProbeResult linear_probe_features(const std::vector<Matrix>& train_features,
                                  const std::vector<std::vector<std::uint32_t>>& train_labels,
                                  const std::vector<Matrix>& test_features,
                                  const std::vector<std::vector<std::uint32_t>>& test_labels,
                                  const ProbeConfig& cfg);

/// Mean |cosine| between distinct channel maps of the embedding, averaged
/// over scenes.
double channel_redundancy(const MlpParams& params, const std::vector<PointCloud>& scenes);
double channel_redundancy(const Matrix& embedding);

}  // namespace epc
