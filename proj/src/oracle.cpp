// Reference losses written as plain nested loops over the pair sets. Kept
// free of the shared kernels in losses.cpp so the two can check each other.

#include <cmath>
#include <string>
#include <vector>

#include "epc/error.hpp"
#include "epc/losses.hpp"

namespace epc {

namespace {

constexpr std::size_t kMaxPoints = 256;
constexpr std::size_t kMaxChannels = 64;
constexpr std::size_t kMaxSegments = 64;

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
  Rows r(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = 0; k < m.cols(); ++k) r[i][k] = m(i, k);
  return r;
}

Rows to_columns(const Matrix& m) {
  Rows r(m.cols(), std::vector<double>(m.rows()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = 0; k < m.cols(); ++k) r[k][i] = m(i, k);
  return r;
}

void normalize_each(Rows& vs) {
  for (auto& v : vs) {
    double s = 0.0;
    for (double x : v) s += x * x;
    const double n = std::sqrt(s);
    const double d = n > kNormEps ? n : kNormEps;
    for (double& x : v) x /= d;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

struct Terms {
  double total = 0.0;
  std::size_t count = 0;
};

double finish(const Terms& t, Reduction r) {
  return r == Reduction::kSum ? t.total : t.total / static_cast<double>(t.count);
}

// -log(exp(pos) / (sum_neg exp(neg) [+ exp(pos)])) without any max shift.
double term(double pos, const std::vector<double>& negs, bool include_pos) {
  if (negs.empty()) fail(ErrorKind::kEmptyReduction, "brute_force_loss: empty negative set");
  double den = include_pos ? std::exp(pos) : 0.0;
  for (double v : negs) den += std::exp(v);
  return -(pos - std::log(den));
}

double oracle_pc(const Matrix& f1, const Matrix& f2, const LossConfig& cfg, PairCounter* ctr) {
  Rows a = to_rows(f1), b = to_rows(f2);
  if (cfg.normalize_rows) {
    normalize_each(a);
    normalize_each(b);
  }
  Terms t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double pos = dot(a[i], b[i]) / cfg.tau;
    if (ctr) ++ctr->positives;
    std::vector<double> negs;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (j == i) continue;
      negs.push_back(dot(a[i], b[j]) / cfg.tau);
      if (ctr) ++ctr->negatives;
    }
    t.total += term(pos, negs, cfg.include_positive_in_denominator);
    ++t.count;
  }
  return finish(t, cfg.reduction);
}

double oracle_ag_directional(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                             const LossConfig& cfg, PairCounter* ctr) {
  Rows a = to_rows(f1);
  Rows b = to_rows(f2);
  // Pooled segment features.
  Rows g(seg.num_segments, std::vector<double>(f2.cols(), 0.0));
  for (std::size_t s = 0; s < seg.num_segments; ++s) {
    std::size_t members = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (seg.segment_of[i] != s) continue;
      ++members;
      for (std::size_t k = 0; k < b[i].size(); ++k) g[s][k] += b[i][k];
    }
    if (members == 0) fail(ErrorKind::kPartition, "brute_force_loss: empty segment");
    for (double& v : g[s]) v /= static_cast<double>(members);
  }
  if (cfg.normalize_rows) {
    normalize_each(a);
    normalize_each(g);
  }
  Terms t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t alpha = seg.segment_of[i];
    const double pos = dot(a[i], g[alpha]) / cfg.tau;
    if (ctr) ++ctr->positives;
    std::vector<double> negs;
    for (std::size_t beta = 0; beta < g.size(); ++beta) {
      if (beta == alpha) continue;
      negs.push_back(dot(a[i], g[beta]) / cfg.tau);
      if (ctr) ++ctr->negatives;
    }
    t.total += term(pos, negs, cfg.include_positive_in_denominator);
    ++t.count;
  }
  return finish(t, cfg.reduction);
}

double oracle_ag(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                 const LossConfig& cfg, PairCounter* ctr) {
  if (seg.num_points() != f1.rows()) fail(ErrorKind::kShape, "brute_force_loss: assignment size");
  if (!cfg.symmetric_ag) return oracle_ag_directional(f1, f2, seg, cfg, ctr);
  return 0.5 * (oracle_ag_directional(f1, f2, seg, cfg, ctr) +
                oracle_ag_directional(f2, f1, seg, cfg, ctr));
}

double oracle_cc(const Matrix& f1, const Matrix& f2, const LossConfig& cfg, PairCounter* ctr) {
  Rows c1 = to_columns(f1), c2 = to_columns(f2);
  if (cfg.normalize_channels) {
    normalize_each(c1);
    normalize_each(c2);
  }
  Terms t;
  for (std::size_t i = 0; i < c1.size(); ++i) {
    const double pos = dot(c1[i], c2[i]) / cfg.tau;
    if (ctr) ++ctr->positives;
    std::vector<double> negs;
    for (std::size_t j = 0; j < c2.size(); ++j) {
      if (j == i) continue;
      negs.push_back(std::fabs(dot(c1[i], c2[j])) / cfg.tau);
      if (ctr) ++ctr->negatives;
    }
    t.total += term(pos, negs, cfg.include_positive_in_denominator);
    ++t.count;
  }
  return finish(t, cfg.reduction);
}

}  // namespace

double brute_force_loss(LossKind kind, const Matrix& f1, const Matrix& f2,
                        const SegmentAssignment* seg, const LossConfig& cfg,
                        PairCounter* counter) {
  cfg.validate();
  if (f1.rows() != f2.rows() || f1.cols() != f2.cols()) {
    fail(ErrorKind::kShape, "brute_force_loss: embedding shapes differ: " + f1.shape_string() +
                                " vs " + f2.shape_string());
  }
  if (f1.rows() > kMaxPoints || f1.cols() > kMaxChannels) {
    fail(ErrorKind::kInvalidArgument, "brute_force_loss: instance " + f1.shape_string() +
                                          " exceeds oracle scale (N<=256, C<=64)");
  }
  const bool needs_seg = kind == LossKind::kAG || kind == LossKind::kEP;
  if (needs_seg) {
    if (!seg) fail(ErrorKind::kInvalidArgument, "brute_force_loss: segment assignment required");
    if (seg->num_segments > kMaxSegments) {
      fail(ErrorKind::kInvalidArgument, "brute_force_loss: M exceeds oracle scale (64)");
    }
  }
  switch (kind) {
    case LossKind::kPC: return oracle_pc(f1, f2, cfg, counter);
    case LossKind::kAG: return oracle_ag(f1, f2, *seg, cfg, counter);
    case LossKind::kCC: return oracle_cc(f1, f2, cfg, counter);
    case LossKind::kEP:
      return oracle_ag(f1, f2, *seg, cfg, counter) + cfg.lambda * oracle_cc(f1, f2, cfg, counter);
  }
  return 0.0;
}

}  // namespace epc
