#pragma once

#include <cstdint>
#include <vector>

#include "epc/numcore.hpp"
#include "epc/pointcloud.hpp"

namespace epc {

/// Disjoint cover of point indices by segment ids in [0, num_segments),
/// every id used at least once.
struct SegmentAssignment {
  std::vector<std::uint32_t> segment_of;
  std::size_t num_segments = 0;

  std::size_t num_points() const noexcept { return segment_of.size(); }
  /// Throws kPartition if an id is out of range or a segment is empty.
  void validate() const;
  std::vector<std::size_t> sizes() const;

  /// Every point its own segment, ids 0..n-1 in point order.
  static SegmentAssignment singletons(std::size_t n);
};

struct KMeansConfig {
  std::size_t target_segments = 32;
  std::size_t max_iters = 100;
  double tol = 1e-4;
  double color_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Optional per-iteration trace of a k-means run.
struct KMeansTrace {
  std::vector<double> objective;  // after each assignment step
  std::size_t iterations = 0;
};

/// N x 6: per-axis min-max normalized positions, then colors * color_weight.
Matrix segment_features(const PointCloud& cloud, double color_weight);

/// Lloyd k-means with k-means++ seeding. M is clamped to N.
SegmentAssignment kmeans_segments(const PointCloud& cloud, const KMeansConfig& cfg,
                                  KMeansTrace* trace = nullptr);

/// Same as kmeans_segments but on precomputed features.
SegmentAssignment kmeans_on_features(const Matrix& features, const KMeansConfig& cfg,
                                     KMeansTrace* trace = nullptr);

}  // namespace epc
