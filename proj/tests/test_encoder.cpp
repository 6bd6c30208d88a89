#include <cmath>

#include "doctest.h"
#include "epc/check.hpp"
#include "epc/encoder.hpp"
#include "epc/error.hpp"

using namespace epc;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  c.positions = Matrix(n, 3);
  c.colors = Matrix(n, 3);
  for (auto& v : c.positions.data()) v = rng.uniform(-3, 3);
  for (auto& v : c.colors.data()) v = rng.uniform();
  return c;
}

}  // namespace

TEST_CASE("init: zero biases, bounded weights, deterministic") {
  const auto p = encoder_init(9, 16, 8, 3);
  REQUIRE(p.layers.size() == 3);
  CHECK(p.input_dim() == 9);
  CHECK(p.output_dim() == 8);
  CHECK(p.num_params() == 9 * 16 + 16 + 16 * 16 + 16 + 16 * 8 + 8);
  const std::size_t fan_in[3] = {9, 16, 16};
  for (std::size_t l = 0; l < 3; ++l) {
    for (double b : p.layers[l].bias.data()) CHECK(b == 0.0);
    const double bound = std::sqrt(6.0 / fan_in[l]);
    for (double w : p.layers[l].weight.data()) CHECK(std::abs(w) <= bound);
  }
  CHECK(encoder_init(9, 16, 8, 3) == p);
  CHECK_FALSE(encoder_init(9, 16, 8, 4) == p);
}

TEST_CASE("features") {
  PointCloud c;
  c.positions = Matrix{{0, 0, 0}, {2, 0, 0}};
  c.colors = Matrix{{1, 0, 0}, {0, 0, 1}};
  const Matrix x = encoder_features(c);
  CHECK(x.cols() == 9);
  CHECK(x(0, 0) == -0.5);
  CHECK(x(1, 0) == 0.5);
  CHECK(x(0, 3) == 1.0);
  CHECK(x(0, 6) == 0.5);
  CHECK(x(1, 8) == 0.5);
}

TEST_CASE("zero weights give zero embedding") {
  const auto p = encoder_init(9, 8, 4, 1).zeros_like();
  const Matrix e = encoder_forward(p, random_cloud(10, 2));
  for (double v : e.data()) CHECK(v == 0.0);
}

TEST_CASE("forward matches a per-point loop") {
  const auto p = encoder_init(9, 12, 5, 7);
  const auto cloud = random_cloud(15, 8);
  const Matrix x = encoder_features(cloud);
  const Matrix e = encoder_forward(p, cloud);
  for (std::size_t i = 0; i < 15; ++i) {
    std::vector<double> h(x.row(i).begin(), x.row(i).end());
    for (std::size_t l = 0; l < 3; ++l) {
      const auto& L = p.layers[l];
      std::vector<double> z(L.weight.cols());
      for (std::size_t o = 0; o < z.size(); ++o) {
        double s = L.bias(0, o);
        for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * L.weight(k, o);
        z[o] = l < 2 ? std::max(s, 0.0) : s;
      }
      h = z;
    }
    for (std::size_t o = 0; o < 5; ++o) CHECK(std::abs(h[o] - e(i, o)) <= 1e-12);
  }
}

TEST_CASE("permutation equivariance") {
  const auto p = encoder_init(9, 12, 5, 7);
  const auto cloud = random_cloud(20, 9);
  PointCloud perm = cloud;
  std::vector<std::size_t> order(20);
  for (std::size_t i = 0; i < 20; ++i) order[i] = (i * 7 + 3) % 20;
  for (std::size_t i = 0; i < 20; ++i)
    for (int k = 0; k < 3; ++k) {
      perm.positions(i, k) = cloud.positions(order[i], k);
      perm.colors(i, k) = cloud.colors(order[i], k);
    }
  const Matrix a = encoder_forward(p, cloud), b = encoder_forward(p, perm);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(b(i, k) - a(order[i], k)) <= 1e-12);
}

TEST_CASE("backward: zero upstream, stale cache, finite differences") {
  const auto p = encoder_init(9, 6, 4, 11);
  const auto cloud = random_cloud(8, 12);
  ForwardCache cache;
  const Matrix e = encoder_forward(p, cloud, &cache);
  const auto zero = encoder_backward(p, cache, Matrix(8, 4));
  for (double v : zero.flatten()) CHECK(v == 0.0);

  try {
    encoder_backward(p, cache, Matrix(7, 4));
    FAIL("expected cache error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kCache);
  }

  Rng rng(13);
  Matrix g(8, 4);
  for (auto& v : g.data()) v = rng.normal();
  const auto analytic = encoder_backward(p, cache, g).flatten();
  const auto f = [&](std::span<const double> flat) {
    const Matrix out = encoder_forward(p.with_values(flat), cloud);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * g.values()[i];
    return s;
  };
  const auto numeric = numeric_gradient(f, p.flatten());
  CHECK(relative_error(numeric, analytic) <= 1e-5);
}

TEST_CASE("checkpoint round trip and errors") {
  const auto p = encoder_init(9, 10, 6, 21);
  const auto bytes = encode_checkpoint(p);
  CHECK(decode_checkpoint(bytes) == p);
  CHECK(checkpoint_hash(p) == checkpoint_hash(decode_checkpoint(bytes)));
  auto bad = bytes;
  bad[1] = 'Z';
  CHECK_THROWS_AS(decode_checkpoint(bad), Error);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  try {
    decode_checkpoint(cut);
    FAIL("expected length error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLength);
  }
  const auto path = std::filesystem::temp_directory_path() / "epc_unit_ckpt.epck";
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path) == p);
}

TEST_CASE("flatten and with_values are inverse") {
  const auto p = encoder_init(9, 5, 3, 2);
  CHECK(p.with_values(p.flatten()) == p);
  CHECK_THROWS_AS(p.with_values(std::vector<double>(3)), Error);
}
