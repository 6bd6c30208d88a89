#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "epc/numcore.hpp"
#include "epc/rng.hpp"

namespace epc {

/// N points: positions in meters, colors in [0,1], optional labels.
struct PointCloud {
  Matrix positions;  // N x 3
  Matrix colors;     // N x 3
  std::optional<std::vector<std::uint32_t>> labels;

  std::size_t size() const noexcept { return positions.rows(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  /// Throws on any violated invariant.
  void validate() const;
};

enum class Axis { kX = 0, kY = 1, kZ = 2 };

struct AugmentParams {
  double scale_min = 0.8;
  double scale_max = 1.2;
  Axis rot_axis = Axis::kZ;
  // Rotation angle is drawn from U[0, rot_max). Pinning rot_max to 0 disables
  // rotation entirely.
  double rot_max = 6.283185307179586;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
  std::uint64_t seed = 0;

  void validate() const;

  /// Scale 1, no rotation, no jitter.
  static AugmentParams identity();
};

/// Index i of view1 corresponds to index i of view2 and of the source cloud.
struct ViewPair {
  PointCloud view1;
  PointCloud view2;
};

PointCloud load_ascii(const std::filesystem::path& path);
void save_ascii(const PointCloud& cloud, const std::filesystem::path& path);

/// EPCC binary layout (all little-endian):
///   "EPCC" | u32 version (=1) | u64 N | u8 has_labels |
///   N x 6 f32 (x y z r g b) | [N x u32 labels]
PointCloud load_binary(const std::filesystem::path& path);
void save_binary(const PointCloud& cloud, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_binary(const PointCloud& cloud);
PointCloud decode_binary(std::span<const std::uint8_t> bytes);

/// Dispatches on the EPCC magic, falling back to the ASCII reader.
PointCloud load_cloud(const std::filesystem::path& path);

/// Scale, then rotate about the centroid, then clipped Gaussian jitter.
/// Colors, labels and point order are untouched.
PointCloud augment(const PointCloud& cloud, const AugmentParams& params, Rng& stream);

/// Two independent augment() draws from sub-streams 1 and 2 of `seed`.
ViewPair make_view_pair(const PointCloud& cloud, const AugmentParams& params,
                        std::uint64_t seed);

Matrix centroid(const Matrix& positions);

}  // namespace epc
