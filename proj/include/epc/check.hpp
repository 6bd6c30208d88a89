#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "epc/encoder.hpp"
#include "epc/losses.hpp"

namespace epc {

/// Central differences of `f` at `x`, one coordinate at a time.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double step = 1e-5);

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest error observed
  std::vector<std::string> messages;

  bool passed() const { return failures == 0 && cases > 0; }
};

/// Random (f1, f2, segments) instance for a loss kind.
struct LossInstance {
  Matrix f1, f2;
  SegmentAssignment seg;
};

LossInstance random_instance(Rng& rng, std::size_t max_n, std::size_t max_c, std::size_t max_m);

/// Vectorized losses against the nested-loop oracle over random instances,
/// every kind, both denominator modes, both normalization modes.
SuiteResult oracle_equivalence_suite(std::uint64_t seed, std::size_t instances,
                                     double tolerance = 1e-10);

/// Analytic embedding gradients and end-to-end encoder gradients against
/// central differences.
SuiteResult gradient_check_suite(std::uint64_t seed, std::size_t instances_per_loss,
                                 double tolerance = 1e-5);

}  // namespace epc
