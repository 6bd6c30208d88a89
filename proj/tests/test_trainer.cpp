#include <cmath>
#include <map>

#include "doctest.h"
#include "epc/error.hpp"
#include "epc/trainer.hpp"

using namespace epc;

TEST_CASE("scene generation") {
  SyntheticSceneConfig cfg;
  cfg.num_clusters = 4;
  cfg.points_per_cluster = 10;
  cfg.cluster_std = 0.0;
  cfg.color_noise_std = 0.0;
  Rng s(1);
  const auto scene = generate_scene(cfg, s);
  CHECK(scene.size() == 40);
  std::map<std::uint32_t, std::size_t> hist;
  for (auto l : *scene.labels) ++hist[l];
  CHECK(hist.size() == 4);
  for (auto [l, n] : hist) CHECK(n == 10);
  for (std::size_t i = 1; i < 10; ++i)
    for (int k = 0; k < 3; ++k) {
      CHECK(scene.positions(i, k) == scene.positions(0, k));
      CHECK(scene.colors(i, k) == scene.colors(0, k));
    }
  Rng a(5), b(5);
  CHECK(encode_binary(generate_scene(cfg, a)) == encode_binary(generate_scene(cfg, b)));
  CHECK(class_base_color(3) == class_base_color(3));
  CHECK_NOTHROW(scene.validate());
}

TEST_CASE("adam: zero gradient, first step, scalar reference") {
  const std::vector<double> p{1.0, -2.0, 3.0};
  auto r = adam_step(p, std::vector<double>(3, 0.0), OptimState::zeros(3), 0.1);
  CHECK(r.params == p);
  CHECK(r.state.step == 1);

  const std::vector<double> g{0.5, -3.0, 1e-3};
  r = adam_step(p, g, OptimState::zeros(3), 0.1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double sign = g[i] > 0 ? 1.0 : -1.0;
    CHECK(std::abs((r.params[i] - p[i]) + 0.1 * sign) <= 1e-4);
  }

  Rng rng(2);
  std::vector<double> params(4), m(4, 0.0), v(4, 0.0), ref(4);
  for (auto& x : params) x = rng.normal();
  ref = params;
  OptimState st = OptimState::zeros(4);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  for (int t = 1; t <= 100; ++t) {
    std::vector<double> grad(4);
    for (auto& x : grad) x = rng.normal();
    auto out = adam_step(params, grad, st, lr);
    params = out.params;
    st = out.state;
    for (std::size_t i = 0; i < 4; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grad[i];
      v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(params[i] - ref[i]) <= 1e-12);
  CHECK_THROWS_AS(adam_step(p, std::vector<double>(2), OptimState::zeros(3), 0.1), Error);
}

TEST_CASE("cosine schedule") {
  TrainConfig cfg;
  cfg.base_lr = 0.02;
  CHECK(scheduled_lr(cfg, 0, 10) == doctest::Approx(0.02));
  CHECK(scheduled_lr(cfg, 5, 10) == doctest::Approx(0.01));
  cfg.lr_schedule = LrSchedule::kConstant;
  CHECK(scheduled_lr(cfg, 7, 10) == 0.02);
}

namespace {

std::vector<PointCloud> small_scenes(std::size_t count, std::uint64_t seed) {
  SyntheticSceneConfig sc;
  sc.points_per_cluster = 64;
  sc.seed = seed;
  return generate_scenes(sc, count);
}

TrainConfig small_train() {
  TrainConfig t;
  t.epochs = 1;
  t.hidden = 16;
  t.embed_dim = 8;
  return t;
}

}  // namespace

TEST_CASE("one epoch over 8 scenes records 8 losses") {
  const auto scenes = small_scenes(8, 1);
  CHECK(scenes[0].size() == 512);
  KMeansConfig km;
  km.target_segments = 16;
  const auto r = pretrain(scenes, small_train(), km);
  CHECK(r.history.size() == 8);
  for (const auto& h : r.history) CHECK(std::isfinite(h.loss));
  const auto csv = history_csv(r.history);
  CHECK(csv.rfind("step,epoch,loss,lr\n", 0) == 0);
}

TEST_CASE("lr = 0 keeps parameters bit-identical") {
  auto t = small_train();
  t.base_lr = 0.0;
  t.epochs = 2;
  KMeansConfig km;
  km.target_segments = 8;
  const auto r = pretrain(small_scenes(3, 2), t, km);
  CHECK(r.params == r.initial);
}

TEST_CASE("pretraining is deterministic for every loss") {
  const auto scenes = small_scenes(3, 3);
  KMeansConfig km;
  km.target_segments = 8;
  for (auto kind : {LossKind::kPC, LossKind::kAG, LossKind::kCC, LossKind::kEP}) {
    auto t = small_train();
    t.loss_kind = kind;
    t.seed = 9;
    t.batch_size = 2;
    if (kind == LossKind::kPC) t.loss.neg_sample_count = 50;
    const auto a = pretrain(scenes, t, km), b = pretrain(scenes, t, km);
    CHECK(checkpoint_hash(a.params) == checkpoint_hash(b.params));
    CHECK(history_csv(a.history) == history_csv(b.history));
    CHECK(a.history.size() == 2);
  }
}

TEST_CASE("single-segment scenes surface the empty-negative error") {
  KMeansConfig km;
  km.target_segments = 1;
  try {
    pretrain(small_scenes(1, 4), small_train(), km);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyReduction);
  }
}

TEST_CASE("probe: separable one-hot features give accuracy 1") {
  std::vector<Matrix> tr, te;
  std::vector<std::vector<std::uint32_t>> trl, tel;
  for (int s = 0; s < 2; ++s) {
    Matrix f(30, 3);
    std::vector<std::uint32_t> l(30);
    for (std::size_t i = 0; i < 30; ++i) {
      l[i] = static_cast<std::uint32_t>(i % 3);
      f(i, l[i]) = 1.0;
    }
    (s == 0 ? tr : te).push_back(f);
    (s == 0 ? trl : tel).push_back(l);
  }
  const auto r = linear_probe_features(tr, trl, te, tel, ProbeConfig{});
  CHECK(r.accuracy == 1.0);
  CHECK(r.warnings.empty());
}

TEST_CASE("probe: constant random embeddings sit near chance") {
  const auto scenes = small_scenes(4, 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Matrix row(1, 4);
    for (auto& v : row.data()) v = rng.normal();
    std::vector<Matrix> tr, te;
    std::vector<std::vector<std::uint32_t>> trl, tel;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      Matrix f(scenes[s].size(), 4);
      for (std::size_t i = 0; i < f.rows(); ++i)
        for (std::size_t k = 0; k < 4; ++k) f(i, k) = row(0, k);
      (s < 3 ? tr : te).push_back(f);
      (s < 3 ? trl : tel).push_back(*scenes[s].labels);
    }
    ProbeConfig pc;
    pc.seed = seed;
    const auto r = linear_probe_features(tr, trl, te, tel, pc);
    CHECK(std::abs(r.accuracy - 1.0 / 8.0) <= 0.1);
  }
}

TEST_CASE("probe: absent classes warn and count as errors") {
  std::vector<Matrix> tr{Matrix{{1, 0}, {0, 1}}}, te{Matrix{{1, 0}, {0, 1}, {1, 1}}};
  std::vector<std::vector<std::uint32_t>> trl{{0, 1}}, tel{{0, 1, 2}};
  const auto r = linear_probe_features(tr, trl, te, tel, ProbeConfig{});
  CHECK(r.absent_classes == std::vector<std::uint32_t>{2});
  CHECK(r.warnings.size() == 1);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("probe never changes the encoder and honours the label fraction") {
  const auto scenes = small_scenes(3, 6);
  const auto p = encoder_init(9, 8, 4, 1);
  const auto before = checkpoint_hash(p);
  ProbeConfig pc;
  pc.label_fraction = 0.01;
  pc.iterations = 50;
  const auto r = linear_probe(p, {scenes[0], scenes[1]}, {scenes[2]}, pc);
  CHECK(checkpoint_hash(p) == before);
  CHECK(r.train_points == 10);
  CHECK(r.test_points == 512);
  CHECK(r.accuracy >= 0.0);
  CHECK(r.accuracy <= 1.0);
}

TEST_CASE("channel redundancy") {
  CHECK(channel_redundancy(Matrix{{1, 0}, {0, 1}}) == 0.0);
  CHECK(channel_redundancy(Matrix{{1, 2}, {2, 4}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(channel_redundancy(Matrix{{1}, {2}}), Error);
}
