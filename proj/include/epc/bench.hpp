#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epc/losses.hpp"

namespace epc {

struct BenchConfig {
  LossKind kind = LossKind::kPC;
  std::vector<std::size_t> sizes = {1000, 2000, 4000, 8000};
  std::size_t m = 32;
  std::size_t c = 32;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  // Accounted bytes above this raise kBudget before anything is allocated.
  std::uint64_t byte_budget = 2ULL << 30;
  // Skip timing; evaluate sizes concurrently and report counts and bytes only.
  bool count_only = false;
  LossConfig loss;

  void validate() const;
};

struct BenchRow {
  LossKind kind = LossKind::kPC;
  std::size_t n = 0, m = 0, c = 0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::uint64_t accounted_bytes = 0;
  double median_seconds = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double negatives_exponent = 0.0;
  double bytes_exponent = 0.0;
  double time_exponent = 0.0;  // 0 in count-only mode

  std::string csv() const;
  std::string table() const;
};

/// Slope of the least-squares line through (log size, log measurement).
double fit_exponent(std::span<const double> sizes, std::span<const double> measurements);

/// Throws kBudget when the accounted buffer for (kind, n) exceeds the budget.
void check_budget(LossKind kind, std::size_t n, std::size_t m, std::size_t c,
                  std::uint64_t budget);

BenchReport bench_loss(const BenchConfig& cfg);

}  // namespace epc
