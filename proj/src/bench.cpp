#include "epc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "epc/error.hpp"
#include "epc/rng.hpp"

namespace epc {

void BenchConfig::validate() const {
  if (sizes.size() < 4) fail(ErrorKind::kInvalidArgument, "bench: need at least 4 sizes for an exponent fit");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 2) fail(ErrorKind::kInvalidArgument, "bench: sizes must be >= 2");
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      fail(ErrorKind::kInvalidArgument, "bench: sizes must be strictly ascending");
    }
  }
  if (repeats < 3 && !count_only) fail(ErrorKind::kInvalidArgument, "bench: repeats must be >= 3");
  if (m < 2 || c < 2) fail(ErrorKind::kInvalidArgument, "bench: m and c must be >= 2");
  loss.validate();
}

double fit_exponent(std::span<const double> sizes, std::span<const double> measurements) {
  if (sizes.size() != measurements.size() || sizes.size() < 4) {
    fail(ErrorKind::kInvalidArgument, "fit_exponent: need at least 4 (size, measurement) pairs");
  }
  const std::size_t k = sizes.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(sizes[i] > 0.0) || !(measurements[i] > 0.0)) {
      fail(ErrorKind::kDomain, "fit_exponent: sizes and measurements must be positive");
    }
    lx[i] = std::log(sizes[i]);
    ly[i] = std::log(measurements[i]);
    mx += lx[i] / static_cast<double>(k);
    my += ly[i] / static_cast<double>(k);
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) fail(ErrorKind::kDomain, "fit_exponent: sizes are all equal");
  return sxy / sxx;
}

void check_budget(LossKind kind, std::size_t n, std::size_t m, std::size_t c,
                  std::uint64_t budget) {
  const std::uint64_t bytes = accounted_bytes(kind, n, m, c);
  if (bytes > budget) {
    std::ostringstream os;
    os << "budget exceeded: loss '" << to_string(kind) << "' at N=" << n;
    if (kind == LossKind::kAG || kind == LossKind::kEP) os << ", M=" << m;
    os << " needs " << bytes << " accounted bytes, budget is " << budget;
    fail(ErrorKind::kBudget, os.str());
  }
}

namespace {

Matrix random_embedding(std::size_t n, std::size_t c, Rng& rng) {
  Matrix f(n, c);
  for (double& v : f.data()) v = rng.normal();
  return f;
}

SegmentAssignment random_partition(std::size_t n, std::size_t m, Rng& rng) {
  SegmentAssignment seg;
  seg.num_segments = std::min(m, n);
  seg.segment_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    seg.segment_of[i] = static_cast<std::uint32_t>(i % seg.num_segments);
  }
  rng.shuffle(seg.segment_of);
  return seg;
}

BenchRow run_size(const BenchConfig& cfg, std::size_t n, std::size_t index) {
  check_budget(cfg.kind, n, cfg.m, cfg.c, cfg.byte_budget);
  Rng rng = Rng(cfg.seed).substream(static_cast<std::uint64_t>(index));
  const Matrix f1 = random_embedding(n, cfg.c, rng);
  const Matrix f2 = random_embedding(n, cfg.c, rng);
  const SegmentAssignment seg = random_partition(n, cfg.m, rng);

  BenchRow row;
  row.kind = cfg.kind;
  row.n = n;
  row.m = seg.num_segments;
  row.c = cfg.c;
  row.accounted_bytes = accounted_bytes(cfg.kind, n, row.m, cfg.c);

  LossConfig loss = cfg.loss;
  loss.neg_sample_count.reset();  // full enumeration
  const std::size_t runs = cfg.count_only ? 1 : cfg.repeats;
  std::vector<double> seconds;
  for (std::size_t r = 0; r < runs; ++r) {
    PairCounter counter;
    const auto t0 = std::chrono::steady_clock::now();
    const LossOutput out = compute_loss(cfg.kind, f1, f2, &seg, loss, nullptr, &counter);
    const auto t1 = std::chrono::steady_clock::now();
    if (!std::isfinite(out.value)) fail(ErrorKind::kDomain, "bench: non-finite loss");
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    row.positives = counter.positives;
    row.negatives = counter.negatives;
  }
  std::sort(seconds.begin(), seconds.end());
  row.median_seconds = cfg.count_only ? 0.0 : seconds[seconds.size() / 2];
  return row;
}

}  // namespace

BenchReport bench_loss(const BenchConfig& cfg) {
  cfg.validate();
  // Budget violations surface before any size is run.
  for (std::size_t n : cfg.sizes) check_budget(cfg.kind, n, cfg.m, cfg.c, cfg.byte_budget);

  BenchReport report;
  if (cfg.count_only) {
    std::vector<std::future<BenchRow>> jobs;
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, run_size, std::cref(cfg), cfg.sizes[i], i));
    }
    for (auto& j : jobs) report.rows.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
      report.rows.push_back(run_size(cfg, cfg.sizes[i], i));
    }
  }

  std::vector<double> ns, negs, bytes, secs;
  for (const auto& r : report.rows) {
    ns.push_back(static_cast<double>(r.n));
    negs.push_back(static_cast<double>(r.negatives));
    bytes.push_back(static_cast<double>(r.accounted_bytes));
    secs.push_back(std::max(r.median_seconds, 1e-9));
  }
  report.negatives_exponent = fit_exponent(ns, negs);
  report.bytes_exponent = fit_exponent(ns, bytes);
  report.time_exponent = cfg.count_only ? 0.0 : fit_exponent(ns, secs);
  return report;
}

std::string BenchReport::csv() const {
  std::ostringstream os;
  os << "# accounted_bytes = 8 bytes x (positive + negative pairs): one similarity buffer,\n"
        "# reused in place for exponentials and the similarity gradient\n";
  os << "kind,n,m,c,positives,negatives,accounted_bytes,median_seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%llu,%llu,%llu,%.6f\n",
                  std::string(to_string(r.kind)).c_str(), r.n, r.m, r.c,
                  static_cast<unsigned long long>(r.positives),
                  static_cast<unsigned long long>(r.negatives),
                  static_cast<unsigned long long>(r.accounted_bytes), r.median_seconds);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "# exponent negatives=%.4f bytes=%.4f time=%.4f\n",
                negatives_exponent, bytes_exponent, time_exponent);
  os << buf;
  return os.str();
}

std::string BenchReport::table() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %8s %6s %4s %10s %14s %14s %12s\n", "kind", "N", "M", "C",
                "positives", "negatives", "bytes", "median_s");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4s %8zu %6zu %4zu %10llu %14llu %14llu %12.6f\n",
                  std::string(to_string(r.kind)).c_str(), r.n, r.m, r.c,
                  static_cast<unsigned long long>(r.positives),
                  static_cast<unsigned long long>(r.negatives),
                  static_cast<unsigned long long>(r.accounted_bytes), r.median_seconds);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "log-log exponent vs N: negatives %.4f, accounted bytes %.4f, time %.4f\n",
                negatives_exponent, bytes_exponent, time_exponent);
  os << buf;
  return os.str();
}

}  // namespace epc
