#include "epc/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "epc/error.hpp"

namespace epc {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kPC: return "pc";
    case LossKind::kAG: return "ag";
    case LossKind::kCC: return "cc";
    case LossKind::kEP: return "ep";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "pc") return LossKind::kPC;
  if (s == "ag") return LossKind::kAG;
  if (s == "cc") return LossKind::kCC;
  if (s == "ep") return LossKind::kEP;
  fail(ErrorKind::kInvalidArgument, "unknown loss kind '" + std::string(s) + "' (pc|ag|cc|ep)");
}

std::string_view to_string(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

Reduction parse_reduction(std::string_view s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  fail(ErrorKind::kInvalidArgument, "unknown reduction '" + std::string(s) + "' (sum|mean)");
}

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::kInvalidArgument, "loss: tau must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorKind::kInvalidArgument, "loss: lambda must be >= 0");
  }
  if (neg_sample_count && *neg_sample_count < 1) {
    fail(ErrorKind::kInvalidArgument, "loss: neg_sample_count must be >= 1");
  }
}

PairCount count_pairs(LossKind kind, std::uint64_t n, std::uint64_t m, std::uint64_t c) {
  if (n < 1 || m < 1 || c < 1) fail(ErrorKind::kInvalidArgument, "count_pairs: n, m, c must be >= 1");
  switch (kind) {
    case LossKind::kPC: return {n, n * n - n};
    case LossKind::kAG: return {n, n * (m - 1)};
    case LossKind::kCC: return {c, c * c - c};
    case LossKind::kEP: return {n + c, n * (m - 1) + c * c - c};
  }
  return {};
}

std::uint64_t accounted_bytes(LossKind kind, std::uint64_t n, std::uint64_t m, std::uint64_t c,
                              std::optional<std::uint64_t> neg_samples) {
  if (kind == LossKind::kPC && neg_samples && *neg_samples < n - 1) {
    return 8 * n * (*neg_samples + 1);
  }
  const PairCount pc = count_pairs(kind, n, m, c);
  return 8 * (pc.positives + pc.negatives);
}

namespace {

void check_pair(const Matrix& f1, const Matrix& f2, const char* who) {
  if (f1.rows() != f2.rows() || f1.cols() != f2.cols()) {
    fail(ErrorKind::kShape, std::string(who) + ": embedding shapes differ: " +
                                f1.shape_string() + " vs " + f2.shape_string());
  }
  if (f1.rows() < 1 || f1.cols() < 1) {
    fail(ErrorKind::kShape, std::string(who) + ": empty embedding " + f1.shape_string());
  }
}

double reduction_weight(Reduction r, std::size_t positives) {
  return r == Reduction::kSum ? 1.0 : 1.0 / static_cast<double>(positives);
}

double reduce_terms(const std::vector<double>& terms, Reduction r) {
  const double s = pairwise_sum(terms);
  return r == Reduction::kSum ? s : s / static_cast<double>(terms.size());
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Row r of `sim` holds the similarities of anchor r to every key; its
// positive key is positive_of[r] and every other key is a negative. Returns
// the per-anchor terms -z_pos + logsumexp(z_den) and overwrites `sim` with
// weight * d(term)/d(sim).
std::vector<double> contrast_rows(Matrix& sim, std::span<const std::size_t> positive_of,
                                  const LossConfig& cfg, bool abs_negatives, double weight) {
  const double inv_tau = 1.0 / cfg.tau;
  std::vector<double> terms(sim.rows());
  std::vector<double> z;
  z.reserve(sim.cols());
  for (std::size_t r = 0; r < sim.rows(); ++r) {
    auto row = sim.row(r);
    const std::size_t p = positive_of[r];
    const double z_pos = row[p] * inv_tau;
    z.clear();
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j == p) {
        if (cfg.include_positive_in_denominator) z.push_back(z_pos);
      } else {
        z.push_back((abs_negatives ? std::abs(row[j]) : row[j]) * inv_tau);
      }
    }
    const double lse = logsumexp(z);
    terms[r] = lse - z_pos;

    std::size_t k = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      double g;
      if (j == p) {
        g = -inv_tau;
        if (cfg.include_positive_in_denominator) g += std::exp(z[k++] - lse) * inv_tau;
      } else {
        g = std::exp(z[k++] - lse) * inv_tau;
        if (abs_negatives) g *= sign_of(row[j]);
      }
      row[j] = weight * g;
    }
  }
  return terms;
}

// Anchors are rows of `queries`; keys are rows of `keys`. Used for both the
// point-level loss (keys = other view's points) and the point-to-segment loss
// (keys = pooled segments).
LossOutput contrast_queries_keys(const Matrix& queries, const Matrix& keys,
                                 std::span<const std::size_t> positive_of,
                                 const LossConfig& cfg, PairCounter* counter) {
  Matrix sim = matmul_nt(queries, keys);
  if (counter) {
    counter->positives += queries.rows();
    counter->negatives += queries.rows() * (keys.rows() - 1);
  }
  const double w = reduction_weight(cfg.reduction, queries.rows());
  const auto terms = contrast_rows(sim, positive_of, cfg, /*abs_negatives=*/false, w);
  LossOutput out;
  out.value = reduce_terms(terms, cfg.reduction);
  out.grad_f1 = matmul_nn(sim, keys);
  out.grad_f2 = matmul_tn(sim, queries);
  return out;
}

LossOutput point_infonce_sampled(const Matrix& a, const Matrix& b, std::size_t k,
                                 const LossConfig& cfg, Rng& stream, PairCounter* counter) {
  const std::size_t n = a.rows();
  const std::size_t c = a.cols();
  const double inv_tau = 1.0 / cfg.tau;
  const double w = reduction_weight(cfg.reduction, n);
  LossOutput out;
  out.grad_f1 = Matrix(n, c);
  out.grad_f2 = Matrix(n, c);
  std::vector<double> terms(n);
  std::vector<double> z;
  std::vector<std::size_t> keys;

  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t t = 0; t < c; ++t) s += a(i, t) * b(j, t);
    return s;
  };
  auto accumulate = [&](std::size_t i, std::size_t j, double g) {
    for (std::size_t t = 0; t < c; ++t) {
      out.grad_f1(i, t) += g * b(j, t);
      out.grad_f2(j, t) += g * a(i, t);
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    // Draw from the n-1 negatives and skip over the anchor's own index.
    keys = stream.sample_without_replacement(n - 1, k);
    for (auto& j : keys) j += (j >= i);
    const double z_pos = dot(i, i) * inv_tau;
    z.clear();
    if (cfg.include_positive_in_denominator) z.push_back(z_pos);
    for (std::size_t j : keys) z.push_back(dot(i, j) * inv_tau);
    if (counter) {
      counter->positives += 1;
      counter->negatives += keys.size();
    }
    const double lse = logsumexp(z);
    terms[i] = lse - z_pos;

    std::size_t idx = 0;
    double g_pos = -inv_tau;
    if (cfg.include_positive_in_denominator) g_pos += std::exp(z[idx++] - lse) * inv_tau;
    accumulate(i, i, w * g_pos);
    for (std::size_t j : keys) accumulate(i, j, w * std::exp(z[idx++] - lse) * inv_tau);
  }
  out.value = reduce_terms(terms, cfg.reduction);
  return out;
}

Matrix maybe_normalize_rows(const Matrix& m, bool on) { return on ? row_l2_normalize(m) : m; }

Matrix maybe_normalize_rows_backward(const Matrix& input, Matrix grad, bool on) {
  return on ? row_l2_normalize_backward(input, grad) : grad;
}

LossOutput ag_directional(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                          const LossConfig& cfg, PairCounter* counter) {
  const Matrix pooled = segment_pool(f2, seg);
  const Matrix queries = maybe_normalize_rows(f1, cfg.normalize_rows);
  const Matrix keys = maybe_normalize_rows(pooled, cfg.normalize_rows);
  std::vector<std::size_t> positive_of(seg.segment_of.begin(), seg.segment_of.end());
  LossOutput out = contrast_queries_keys(queries, keys, positive_of, cfg, counter);
  out.grad_f1 = maybe_normalize_rows_backward(f1, std::move(out.grad_f1), cfg.normalize_rows);
  out.grad_f2 = segment_pool_backward(
      maybe_normalize_rows_backward(pooled, std::move(out.grad_f2), cfg.normalize_rows), seg);
  return out;
}

}  // namespace

Matrix segment_pool(const Matrix& f, const SegmentAssignment& seg) {
  if (seg.num_points() != f.rows()) {
    fail(ErrorKind::kShape, "segment_pool: assignment covers " +
                                std::to_string(seg.num_points()) + " points, embedding has " +
                                std::to_string(f.rows()) + " rows");
  }
  seg.validate();
  const auto sizes = seg.sizes();
  Matrix pooled(seg.num_segments, f.cols());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    auto dst = pooled.row(seg.segment_of[i]);
    auto src = f.row(i);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
  }
  for (std::size_t a = 0; a < seg.num_segments; ++a)
    for (double& v : pooled.row(a)) v /= static_cast<double>(sizes[a]);
  return pooled;
}

Matrix segment_pool_backward(const Matrix& grad_pooled, const SegmentAssignment& seg) {
  if (grad_pooled.rows() != seg.num_segments) {
    fail(ErrorKind::kShape, "segment_pool_backward: gradient has " +
                                std::to_string(grad_pooled.rows()) + " rows for " +
                                std::to_string(seg.num_segments) + " segments");
  }
  const auto sizes = seg.sizes();
  Matrix grad(seg.num_points(), grad_pooled.cols());
  for (std::size_t i = 0; i < seg.num_points(); ++i) {
    const std::size_t a = seg.segment_of[i];
    auto src = grad_pooled.row(a);
    auto dst = grad.row(i);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] / static_cast<double>(sizes[a]);
  }
  return grad;
}

LossOutput point_infonce(const Matrix& f1, const Matrix& f2, const LossConfig& cfg, Rng* stream,
                         PairCounter* counter) {
  cfg.validate();
  check_pair(f1, f2, "point_infonce");
  const std::size_t n = f1.rows();
  if (n < 2) fail(ErrorKind::kEmptyReduction, "point_infonce: N=1 leaves the negative set empty");

  const Matrix a = maybe_normalize_rows(f1, cfg.normalize_rows);
  const Matrix b = maybe_normalize_rows(f2, cfg.normalize_rows);
  LossOutput out;
  if (cfg.neg_sample_count && *cfg.neg_sample_count < n - 1) {
    if (!stream) fail(ErrorKind::kInvalidArgument, "point_infonce: sampling requires an RNG stream");
    out = point_infonce_sampled(a, b, *cfg.neg_sample_count, cfg, *stream, counter);
  } else {
    std::vector<std::size_t> positive_of(n);
    for (std::size_t i = 0; i < n; ++i) positive_of[i] = i;
    out = contrast_queries_keys(a, b, positive_of, cfg, counter);
  }
  out.grad_f1 = maybe_normalize_rows_backward(f1, std::move(out.grad_f1), cfg.normalize_rows);
  out.grad_f2 = maybe_normalize_rows_backward(f2, std::move(out.grad_f2), cfg.normalize_rows);
  return out;
}

LossOutput ag_contrast(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                       const LossConfig& cfg, PairCounter* counter) {
  cfg.validate();
  check_pair(f1, f2, "ag_contrast");
  if (seg.num_points() != f1.rows()) {
    fail(ErrorKind::kShape, "ag_contrast: assignment covers " + std::to_string(seg.num_points()) +
                                " points, embedding has " + std::to_string(f1.rows()));
  }
  if (seg.num_segments < 2) {
    fail(ErrorKind::kEmptyReduction, "ag_contrast: M=1 leaves every negative set empty");
  }
  if (!cfg.symmetric_ag) return ag_directional(f1, f2, seg, cfg, counter);

  LossOutput fwd = ag_directional(f1, f2, seg, cfg, counter);
  LossOutput bwd = ag_directional(f2, f1, seg, cfg, counter);
  LossOutput out;
  out.value = 0.5 * (fwd.value + bwd.value);
  out.grad_f1 = scaled(fwd.grad_f1, 0.5);
  axpy(0.5, bwd.grad_f2, out.grad_f1);
  out.grad_f2 = scaled(fwd.grad_f2, 0.5);
  axpy(0.5, bwd.grad_f1, out.grad_f2);
  return out;
}

LossOutput channel_contrast(const Matrix& f1, const Matrix& f2, const LossConfig& cfg,
                            PairCounter* counter) {
  cfg.validate();
  check_pair(f1, f2, "channel_contrast");
  const std::size_t c = f1.cols();
  if (c < 2) fail(ErrorKind::kEmptyReduction, "channel_contrast: C=1 leaves the negative set empty");

  const Matrix a = cfg.normalize_channels ? col_l2_normalize(f1) : f1;
  const Matrix b = cfg.normalize_channels ? col_l2_normalize(f2) : f2;
  Matrix sim = matmul_tn(a, b);  // C x C, channel i of view 1 against channel j of view 2
  if (counter) {
    counter->positives += c;
    counter->negatives += c * (c - 1);
  }
  std::vector<std::size_t> positive_of(c);
  for (std::size_t i = 0; i < c; ++i) positive_of[i] = i;
  const double w = reduction_weight(cfg.reduction, c);
  const auto terms = contrast_rows(sim, positive_of, cfg, /*abs_negatives=*/true, w);

  LossOutput out;
  out.value = reduce_terms(terms, cfg.reduction);
  Matrix ga = matmul_nt(b, sim);  // b * G^T
  Matrix gb = matmul_nn(a, sim);  // a * G
  out.grad_f1 = cfg.normalize_channels ? col_l2_normalize_backward(f1, ga) : std::move(ga);
  out.grad_f2 = cfg.normalize_channels ? col_l2_normalize_backward(f2, gb) : std::move(gb);
  return out;
}

LossOutput ep_contrast(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                       const LossConfig& cfg, PairCounter* counter) {
  LossOutput out = ag_contrast(f1, f2, seg, cfg, counter);
  const LossOutput cc = channel_contrast(f1, f2, cfg, counter);
  out.value += cfg.lambda * cc.value;
  axpy(cfg.lambda, cc.grad_f1, out.grad_f1);
  axpy(cfg.lambda, cc.grad_f2, out.grad_f2);
  return out;
}

LossOutput compute_loss(LossKind kind, const Matrix& f1, const Matrix& f2,
                        const SegmentAssignment* seg, const LossConfig& cfg, Rng* stream,
                        PairCounter* counter) {
  auto need_seg = [&]() -> const SegmentAssignment& {
    if (!seg) fail(ErrorKind::kInvalidArgument, "loss '" + std::string(to_string(kind)) +
                                                    "' requires a segment assignment");
    return *seg;
  };
  switch (kind) {
    case LossKind::kPC: return point_infonce(f1, f2, cfg, stream, counter);
    case LossKind::kAG: return ag_contrast(f1, f2, need_seg(), cfg, counter);
    case LossKind::kCC: return channel_contrast(f1, f2, cfg, counter);
    case LossKind::kEP: return ep_contrast(f1, f2, need_seg(), cfg, counter);
  }
  fail(ErrorKind::kInvalidArgument, "unknown loss kind");
}

}  // namespace epc
