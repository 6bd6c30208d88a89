#include "epc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace epc {

Rng Rng::substream(std::uint64_t tag) const {
  return Rng(mix(key_ ^ mix(tag + kGolden)), 0);
}

Rng Rng::substream(std::string_view name) const {
  // FNV-1a over the name.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return substream(h);
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  if (k >= n) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  // Floyd's algorithm.
  out.reserve(k);
  std::unordered_set<std::size_t> taken;
  taken.reserve(k * 2);
  for (std::size_t j = n - k; j < n; ++j) {
    const auto t = static_cast<std::size_t>(below(j + 1));
    const std::size_t pick = taken.insert(t).second ? t : j;
    if (pick == j) taken.insert(j);
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace epc
