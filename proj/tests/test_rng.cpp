#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "epc/rng.hpp"

using epc::Rng;

TEST_CASE("rng is reproducible and sub-streams are independent of draw order") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(43);
  CHECK(Rng(42).next_u64() != c.next_u64());

  Rng root(1);
  const auto s1 = root.substream("train").next_u64();
  root.next_u64();
  root.next_u64();
  CHECK(root.substream("train").next_u64() == s1);
  CHECK(root.substream("train").next_u64() != root.substream("kmeans").next_u64());
  CHECK(root.substream(1).next_u64() != root.substream(2).next_u64());
}

TEST_CASE("uniform, normal and below are in range with sane moments") {
  Rng r(3);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
    CHECK(r.below(7) < 7);
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("sampling without replacement") {
  Rng r(8);
  const auto s = r.sample_without_replacement(100, 30);
  CHECK(s.size() == 30);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 30);
  CHECK(s.back() < 100);
  const auto all = r.sample_without_replacement(5, 9);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("shuffle is a permutation") {
  Rng r(2);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(v);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
