#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include "epc/numcore.hpp"
#include "epc/rng.hpp"
#include "epc/superpoint.hpp"

namespace epc {

enum class LossKind { kPC, kAG, kCC, kEP };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view s);

enum class Reduction { kSum, kMean };

std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view s);

inline constexpr std::size_t kDefaultNegativeSamples = 2000;

struct LossConfig {
  double tau = 1.0;
  double lambda = 0.1;
  bool normalize_rows = true;
  bool normalize_channels = true;
  // The positive is excluded from the denominator unless this is set.
  bool include_positive_in_denominator = false;
  Reduction reduction = Reduction::kMean;
  // Per-anchor uniform negative sampling for the point-level loss.
  std::optional<std::size_t> neg_sample_count;
  // Average the point->segment loss over both view directions.
  bool symmetric_ag = false;

  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  Matrix grad_f1;
  Matrix grad_f2;
};

/// Similarity evaluations performed by a loss call.
struct PairCounter {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

struct PairCount {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  friend bool operator==(const PairCount&, const PairCount&) = default;
};

/// Positive and negative pair counts of each enumeration:
/// PC (n, n^2-n), AG (n, n(m-1)), CC (c, c^2-c); EP is AG plus CC.
PairCount count_pairs(LossKind kind, std::uint64_t n, std::uint64_t m, std::uint64_t c);

/// Bytes of the similarity buffer a loss call materializes (8 per entry).
/// The buffer holds every evaluated pair and is reused in place for the
/// exponentials and the similarity gradient, so this is the whole
/// auxiliary inventory that scales with the pair sets.
std::uint64_t accounted_bytes(LossKind kind, std::uint64_t n, std::uint64_t m,
                              std::uint64_t c,
                              std::optional<std::uint64_t> neg_samples = std::nullopt);

/// Row alpha = mean of the rows assigned to segment alpha.
Matrix segment_pool(const Matrix& f, const SegmentAssignment& seg);
/// Backward: each member row receives grad_pooled[alpha] / |S_alpha|.
Matrix segment_pool_backward(const Matrix& grad_pooled, const SegmentAssignment& seg);

LossOutput point_infonce(const Matrix& f1, const Matrix& f2, const LossConfig& cfg,
                         Rng* stream = nullptr, PairCounter* counter = nullptr);

LossOutput ag_contrast(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                       const LossConfig& cfg, PairCounter* counter = nullptr);

LossOutput channel_contrast(const Matrix& f1, const Matrix& f2, const LossConfig& cfg,
                            PairCounter* counter = nullptr);

/// L_AG + lambda * L_CC.
LossOutput ep_contrast(const Matrix& f1, const Matrix& f2, const SegmentAssignment& seg,
                       const LossConfig& cfg, PairCounter* counter = nullptr);

/// Dispatch on kind. `seg` is required for AG and EP.
LossOutput compute_loss(LossKind kind, const Matrix& f1, const Matrix& f2,
                        const SegmentAssignment* seg, const LossConfig& cfg,
                        Rng* stream = nullptr, PairCounter* counter = nullptr);

/// Reference value by explicit nested loops over the pair enumeration.
/// No vectorization, no sampling, no shared kernels with the losses above.
/// Limited to N <= 256, C <= 64, M <= 64.
double brute_force_loss(LossKind kind, const Matrix& f1, const Matrix& f2,
                        const SegmentAssignment* seg, const LossConfig& cfg,
                        PairCounter* counter = nullptr);

}  // namespace epc
