#include "epc/superpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epc/error.hpp"
#include "epc/rng.hpp"

namespace epc {

void SegmentAssignment::validate() const {
  if (num_segments == 0) fail(ErrorKind::kPartition, "segment assignment has zero segments");
  std::vector<std::size_t> counts(num_segments, 0);
  for (std::size_t i = 0; i < segment_of.size(); ++i) {
    if (segment_of[i] >= num_segments) {
      fail(ErrorKind::kPartition, "point " + std::to_string(i) + " has segment id " +
                                      std::to_string(segment_of[i]) + " >= M=" +
                                      std::to_string(num_segments));
    }
    ++counts[segment_of[i]];
  }
  for (std::size_t a = 0; a < num_segments; ++a) {
    if (counts[a] == 0) {
      fail(ErrorKind::kPartition, "segment " + std::to_string(a) + " is empty");
    }
  }
}

std::vector<std::size_t> SegmentAssignment::sizes() const {
  std::vector<std::size_t> counts(num_segments, 0);
  for (auto s : segment_of) ++counts.at(s);
  return counts;
}

SegmentAssignment SegmentAssignment::singletons(std::size_t n) {
  SegmentAssignment seg;
  seg.num_segments = n;
  seg.segment_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) seg.segment_of[i] = static_cast<std::uint32_t>(i);
  return seg;
}

void KMeansConfig::validate() const {
  if (target_segments < 1) fail(ErrorKind::kInvalidArgument, "kmeans: target_segments must be >= 1");
  if (max_iters < 1) fail(ErrorKind::kInvalidArgument, "kmeans: max_iters must be >= 1");
  if (!(tol >= 0.0)) fail(ErrorKind::kInvalidArgument, "kmeans: tol must be >= 0");
  if (!(color_weight >= 0.0)) fail(ErrorKind::kInvalidArgument, "kmeans: color_weight must be >= 0");
}

Matrix segment_features(const PointCloud& cloud, double color_weight) {
  cloud.validate();
  const std::size_t n = cloud.size();
  Matrix feats(n, 6);
  for (int k = 0; k < 3; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, cloud.positions(i, k));
      hi = std::max(hi, cloud.positions(i, k));
    }
    for (std::size_t i = 0; i < n; ++i) {
      feats(i, k) = hi > lo ? (cloud.positions(i, k) - lo) / (hi - lo) : 0.5;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) feats(i, 3 + k) = color_weight * cloud.colors(i, k);
  return feats;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t m, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(m, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);

  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < m; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += d2[i];
      if (total > 0.0) {
        double r = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= d2[i];
          if (r < 0.0 && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        while (d2[pick] == 0.0) --pick;  // guard against rounding at the tail
      } else {
        // All remaining points coincide with a center: take any unchosen one.
        std::size_t k = static_cast<std::size_t>(rng.below(n - c));
        for (pick = 0;; ++pick) {
          if (!chosen[pick] && k-- == 0) break;
        }
      }
    }
    chosen[pick] = 1;
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x.row(i), centers.row(c)));
  }
  return centers;
}

}  // namespace

SegmentAssignment kmeans_on_features(const Matrix& x, const KMeansConfig& cfg,
                                     KMeansTrace* trace) {
  cfg.validate();
  const std::size_t n = x.rows();
  if (n == 0) fail(ErrorKind::kShape, "kmeans on empty feature matrix");
  const std::size_t m = std::min(cfg.target_segments, n);
  if (m == n) return SegmentAssignment::singletons(n);

  Rng rng = Rng(cfg.seed).substream("kmeans");
  Matrix centers = kmeanspp_seed(x, m, rng);
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(m, 0);

  std::size_t iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    // Assignment step; ties go to the lowest centroid index.
    bool changed = iter == 0;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t c = 0; c < m; ++c) {
        const double d = sq_dist(x.row(i), centers.row(c));
        if (d < best) {
          best = d;
          arg = static_cast<std::uint32_t>(c);
        }
      }
      changed |= assign[i] != arg;
      assign[i] = arg;
      dist[i] = best;
      ++counts[arg];
    }

    // Empty-cluster repair: the empty cluster takes the point farthest from
    // its centroid among clusters that can spare one.
    for (std::size_t c = 0; c < m; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assign[i]] > 1 && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      --counts[assign[far]];
      assign[far] = static_cast<std::uint32_t>(c);
      counts[c] = 1;
      dist[far] = 0.0;
      std::copy(x.row(far).begin(), x.row(far).end(), centers.row(c).begin());
      changed = true;
    }

    if (trace) {
      double obj = 0.0;
      for (double d : dist) obj += d;
      trace->objective.push_back(obj);
    }

    if (!changed) break;

    // Update step.
    Matrix next(m, x.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(assign[i]);
      auto src = x.row(i);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
      max_shift = std::max(max_shift, std::sqrt(sq_dist(next.row(c), centers.row(c))));
    }
    centers = std::move(next);
    // Features live in the unit cube, so an absolute shift is already
    // relative to the scene extent.
    if (max_shift < cfg.tol) {
      ++iter;
      break;
    }
  }
  if (trace) trace->iterations = iter;

  SegmentAssignment seg;
  seg.num_segments = m;
  seg.segment_of = std::move(assign);
  seg.validate();
  return seg;
}

SegmentAssignment kmeans_segments(const PointCloud& cloud, const KMeansConfig& cfg,
                                  KMeansTrace* trace) {
  return kmeans_on_features(segment_features(cloud, cfg.color_weight), cfg, trace);
}

}  // namespace epc
