#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "epc/config.hpp"
#include "epc/error.hpp"

using namespace epc;

TEST_CASE("defaults resolve and every key round-trips") {
  RunConfig cfg;
  CHECK(cfg.get("loss.tau") == "1");
  CHECK(cfg.get("loss.lambda") == "0.1");
  CHECK(cfg.get("kmeans.segments") == "32");
  CHECK(cfg.get("train.loss") == "ep");
  const auto text = cfg.resolved();
  for (const auto& k : RunConfig::keys()) {
    CHECK(text.find(k + " = ") != std::string::npos);
    RunConfig other;
    other.set(k, cfg.get(k));
    CHECK(other.get(k) == cfg.get(k));
  }
}

TEST_CASE("unknown keys and bad values are rejected") {
  RunConfig cfg;
  try {
    cfg.set("loss.temperature", "1");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("loss.temperature") != std::string::npos);
  }
  CHECK_THROWS_AS(cfg.set("loss.tau", "abc"), Error);
  CHECK_THROWS_AS(cfg.set("train.loss", "xyz"), Error);
  CHECK_THROWS_AS(cfg.set("loss.normalize_rows", "maybe"), Error);
}

TEST_CASE("config text with comments; line numbers in errors") {
  RunConfig cfg;
  cfg.load_text("# header\nloss.tau = 0.5  # inline\n\nkmeans.segments = 2000\nloss.neg_samples = 2000\n");
  CHECK(cfg.train.loss.tau == 0.5);
  CHECK(cfg.kmeans.target_segments == 2000);
  CHECK(cfg.train.loss.neg_sample_count.value() == 2000);
  try {
    cfg.load_text("seed = 1\nnot a pair\n", "x.cfg");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
}

TEST_CASE("seed propagation and EPC_SEED") {
  RunConfig a, b;
  a.set("seed", "5");
  a.propagate_seed();
  b.set("seed", "5");
  b.propagate_seed();
  CHECK(a.train.seed == b.train.seed);
  CHECK(a.train.seed != a.kmeans.seed);
  RunConfig c;
  c.set("seed", "6");
  c.propagate_seed();
  CHECK(c.train.seed != a.train.seed);

  setenv("EPC_SEED", "77", 1);
  RunConfig e;
  e.apply_environment();
  CHECK(e.seed == 77);
  unsetenv("EPC_SEED");
}
