#include <set>

#include "doctest.h"
#include "epc/error.hpp"
#include "epc/superpoint.hpp"
#include "epc/trainer.hpp"

using namespace epc;

TEST_CASE("segment_features endpoints, weight and degenerate axes") {
  PointCloud c;
  c.positions = Matrix{{0, 0, 0}, {1, 1, 1}};
  c.colors = Matrix{{1, 1, 1}, {0, 0, 0}};
  const Matrix f = segment_features(c, 2.0);
  CHECK(f == Matrix{{0, 0, 0, 2, 2, 2}, {1, 1, 1, 0, 0, 0}});
  const Matrix z = segment_features(c, 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 3; k < 6; ++k) CHECK(z(i, k) == 0.0);

  PointCloud one;
  one.positions = Matrix{{4, -2, 9}};
  one.colors = Matrix{{0.1, 0.2, 0.3}};
  const Matrix s = segment_features(one, 1.0);
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 1) == 0.5);
  CHECK(s(0, 2) == 0.5);
}

TEST_CASE("segment assignment validation") {
  SegmentAssignment a{{0, 1, 1}, 2};
  CHECK_NOTHROW(a.validate());
  CHECK(a.sizes() == std::vector<std::size_t>{1, 2});
  SegmentAssignment gap{{0, 2, 2}, 3};
  CHECK_THROWS_AS(gap.validate(), Error);
  SegmentAssignment oob{{0, 3}, 2};
  CHECK_THROWS_AS(oob.validate(), Error);
  const auto s = SegmentAssignment::singletons(4);
  CHECK(s.num_segments == 4);
  CHECK(s.segment_of == std::vector<std::uint32_t>{0, 1, 2, 3});
}

TEST_CASE("N <= M gives singletons") {
  PointCloud c;
  c.positions = Matrix{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  c.colors = Matrix(3, 3, 0.5);
  KMeansConfig cfg;
  cfg.target_segments = 10;
  const auto seg = kmeans_segments(c, cfg);
  CHECK(seg.num_segments == 3);
  CHECK(seg.segment_of == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("partition invariants and monotone objective on random scenes") {
  Rng root(21);
  for (int t = 0; t < 50; ++t) {
    Rng r = root.substream(static_cast<std::uint64_t>(t));
    SyntheticSceneConfig sc;
    sc.num_clusters = 1 + r.below(6);
    sc.points_per_cluster = 5 + r.below(40);
    sc.seed = r.next_u64();
    Rng s = Rng(sc.seed);
    const auto cloud = generate_scene(sc, s);
    KMeansConfig cfg;
    cfg.target_segments = 1 + r.below(20);
    cfg.seed = r.next_u64();
    KMeansTrace trace;
    const auto seg = kmeans_segments(cloud, cfg, &trace);
    CHECK_NOTHROW(seg.validate());
    CHECK(seg.num_points() == cloud.size());
    CHECK(seg.num_segments == std::min(cfg.target_segments, cloud.size()));
    for (std::size_t i = 1; i < trace.objective.size(); ++i)
      CHECK(trace.objective[i] <= trace.objective[i - 1] + 1e-9);
  }
}

TEST_CASE("duplicated points still give non-empty segments") {
  PointCloud c;
  c.positions = Matrix(20, 3, 1.0);
  c.colors = Matrix(20, 3, 0.25);
  KMeansConfig cfg;
  cfg.target_segments = 5;
  const auto seg = kmeans_segments(c, cfg);
  CHECK_NOTHROW(seg.validate());
  CHECK(seg.num_segments == 5);
}

TEST_CASE("two separated blobs are recovered") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    const std::size_t per = 60;
    PointCloud c;
    c.positions = Matrix(2 * per, 3);
    c.colors = Matrix(2 * per, 3, 0.5);
    for (std::size_t i = 0; i < 2 * per; ++i)
      for (int k = 0; k < 3; ++k) c.positions(i, k) = (i < per ? 0.0 : 10.0) + 0.3 * r.normal();
    KMeansConfig cfg;
    cfg.target_segments = 2;
    cfg.seed = seed;
    const auto seg = kmeans_segments(c, cfg);
    const auto a = seg.segment_of[0], b = seg.segment_of[per];
    CHECK(a != b);
    for (std::size_t i = 0; i < 2 * per; ++i) CHECK(seg.segment_of[i] == (i < per ? a : b));
  }
}

TEST_CASE("kmeans is deterministic") {
  SyntheticSceneConfig sc;
  auto scenes = generate_scenes(sc, 1);
  KMeansConfig cfg;
  cfg.seed = 5;
  CHECK(kmeans_segments(scenes[0], cfg).segment_of == kmeans_segments(scenes[0], cfg).segment_of);
}
