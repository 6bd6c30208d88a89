// Exercises the shared library through the C header only.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "epcontrast.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const auto d = fs::temp_directory_path() / "epc_capi";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("status names and last error") {
  CHECK(std::string(epc_status_name(EPC_OK)) == "ok");
  epc_config* cfg = nullptr;
  REQUIRE(epc_config_create(&cfg) == EPC_OK);
  CHECK(epc_config_set(cfg, "no.such.key", "1") == EPC_ERR_CONFIG);
  CHECK(std::string(epc_last_error()).find("no.such.key") != std::string::npos);
  const char* v = nullptr;
  REQUIRE(epc_config_get(cfg, "loss.lambda", &v) == EPC_OK);
  CHECK(std::string(v) == "0.1");
  CHECK(std::string(epc_config_resolved(cfg)).find("loss.tau = 1") != std::string::npos);
  epc_config_destroy(cfg);
  epc_loss_kind k;
  CHECK(epc_parse_loss_kind("ag", &k) == EPC_OK);
  CHECK(k == EPC_LOSS_AG);
  CHECK(epc_parse_loss_kind("zz", &k) == EPC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("losses through the C API") {
  epc_config* cfg = nullptr;
  REQUIRE(epc_config_create(&cfg) == EPC_OK);
  REQUIRE(epc_config_set(cfg, "loss.reduction", "sum") == EPC_OK);
  const double eye[4] = {1, 0, 0, 1};
  const uint32_t ids[2] = {0, 1};
  epc_segments* seg = nullptr;
  REQUIRE(epc_segments_create(2, ids, 2, &seg) == EPC_OK);
  double value = 0, g1[4], g2[4];
  REQUIRE(epc_loss_eval(EPC_LOSS_EP, 2, 2, eye, eye, seg, cfg, 0, &value, g1, g2) == EPC_OK);
  CHECK(value == doctest::Approx(-2.2));
  double oracle = 0;
  REQUIRE(epc_loss_oracle(EPC_LOSS_EP, 2, 2, eye, eye, seg, cfg, &oracle) == EPC_OK);
  CHECK(oracle == doctest::Approx(-2.2));
  CHECK(epc_loss_eval(EPC_LOSS_AG, 2, 2, eye, eye, nullptr, cfg, 0, &value, nullptr, nullptr) ==
        EPC_ERR_INVALID_ARGUMENT);
  const double row[2] = {1, 2};
  CHECK(epc_loss_eval(EPC_LOSS_PC, 1, 2, row, row, nullptr, cfg, 0, &value, nullptr, nullptr) ==
        EPC_ERR_EMPTY_REDUCTION);
  uint64_t pos = 0, neg = 0;
  REQUIRE(epc_count_pairs(EPC_LOSS_PC, 100, 1, 1, &pos, &neg) == EPC_OK);
  CHECK(neg == 9900);
  const uint32_t bad[2] = {0, 0};
  epc_segments* invalid = nullptr;
  CHECK(epc_segments_create(2, bad, 2, &invalid) == EPC_ERR_PARTITION);
  epc_segments_destroy(seg);
  epc_config_destroy(cfg);
}

TEST_CASE("clouds, segments, models, training and probing") {
  epc_config* cfg = nullptr;
  REQUIRE(epc_config_create(&cfg) == EPC_OK);
  for (auto [k, v] : {std::pair{"scene.points_per_cluster", "32"}, {"train.epochs", "2"},
                      {"encoder.hidden", "8"}, {"encoder.channels", "4"}, {"kmeans.segments", "8"},
                      {"probe.iterations", "50"}, {"seed", "3"}}) {
    REQUIRE(epc_config_set(cfg, k, v) == EPC_OK);
  }
  REQUIRE(epc_config_finalize(cfg) == EPC_OK);

  std::vector<epc_cloud*> scenes(4);
  for (uint64_t i = 0; i < 4; ++i) REQUIRE(epc_scene_generate(cfg, i, &scenes[i]) == EPC_OK);
  CHECK(epc_cloud_size(scenes[0]) == 256);
  CHECK(epc_cloud_has_labels(scenes[0]) == 1);

  const auto path = (scratch() / "s0.epcc").string();
  REQUIRE(epc_cloud_save_binary(scenes[0], path.c_str()) == EPC_OK);
  epc_cloud* loaded = nullptr;
  REQUIRE(epc_cloud_load(path.c_str(), &loaded) == EPC_OK);
  CHECK(epc_cloud_size(loaded) == 256);
  std::vector<double> small(3);
  CHECK(epc_cloud_positions(loaded, small.data(), small.size()) == EPC_ERR_LENGTH);
  epc_cloud_destroy(loaded);
  CHECK(epc_cloud_load((scratch() / "missing.epcc").string().c_str(), &loaded) == EPC_ERR_IO);

  epc_segments* seg = nullptr;
  int clamped = 0;
  REQUIRE(epc_segments_kmeans(scenes[0], cfg, 1000, &seg, &clamped) == EPC_OK);
  CHECK(clamped == 1);
  CHECK(epc_segments_count(seg) == 256);
  epc_segments_destroy(seg);

  epc_cloud *v1 = nullptr, *v2 = nullptr;
  REQUIRE(epc_cloud_view_pair(scenes[0], cfg, 5, &v1, &v2) == EPC_OK);
  CHECK(epc_cloud_size(v1) == epc_cloud_size(v2));
  epc_cloud_destroy(v1);
  epc_cloud_destroy(v2);

  const epc_cloud* const* all = scenes.data();
  epc_model* model = nullptr;
  epc_history* hist = nullptr;
  REQUIRE(epc_pretrain(cfg, all, 3, nullptr, nullptr, &model, &hist) == EPC_OK);
  CHECK(epc_history_length(hist) == 6);
  CHECK(std::string(epc_history_csv(hist)).rfind("step,epoch,loss,lr", 0) == 0);
  CHECK(epc_model_channels(model) == 4);

  const auto ckpt = (scratch() / "m.epck").string();
  REQUIRE(epc_model_save(model, ckpt.c_str()) == EPC_OK);
  epc_model* again = nullptr;
  REQUIRE(epc_model_load(ckpt.c_str(), &again) == EPC_OK);
  CHECK(epc_model_hash(again) == epc_model_hash(model));

  std::vector<double> emb(256 * 4);
  REQUIRE(epc_model_embed(model, scenes[3], emb.data(), emb.size()) == EPC_OK);

  epc_probe_result* pr = nullptr;
  REQUIRE(epc_probe(model, cfg, all, 3, all + 3, 1, &pr) == EPC_OK);
  CHECK(epc_probe_accuracy(pr) >= 0.0);
  CHECK(epc_probe_accuracy(pr) <= 1.0);
  CHECK(epc_model_hash(again) == epc_model_hash(model));
  epc_probe_result_destroy(pr);

  double red = 0;
  REQUIRE(epc_channel_redundancy(model, all + 3, 1, &red) == EPC_OK);
  CHECK(red >= 0.0);
  CHECK(red <= 1.0);

  epc_model_destroy(again);
  epc_model_destroy(model);
  epc_history_destroy(hist);
  for (auto* s : scenes) epc_cloud_destroy(s);
  epc_config_destroy(cfg);
}

TEST_CASE("bench and self check") {
  epc_config* cfg = nullptr;
  REQUIRE(epc_config_create(&cfg) == EPC_OK);
  const size_t sizes[4] = {20, 40, 80, 160};
  epc_bench_report* rep = nullptr;
  REQUIRE(epc_bench(cfg, EPC_LOSS_CC, sizes, 4, &rep) == EPC_OK);
  CHECK(std::abs(epc_bench_report_exponent(rep)) < 1e-12);
  CHECK(std::string(epc_bench_report_csv(rep)).find("cc,20,") != std::string::npos);
  epc_bench_report_destroy(rep);

  REQUIRE(epc_config_set(cfg, "bench.budget_bytes", "1000") == EPC_OK);
  CHECK(epc_bench(cfg, EPC_LOSS_PC, sizes, 4, &rep) == EPC_ERR_BUDGET);

  const double xs[4] = {1, 2, 4, 8}, ys[4] = {0, 1, 2, 3};
  double slope = 0;
  CHECK(epc_fit_exponent(xs, ys, 4, &slope) == EPC_ERR_DOMAIN);

  epc_check_report* chk = nullptr;
  int passed = 0;
  REQUIRE(epc_self_check(1, 5, 1, &chk, &passed) == EPC_OK);
  CHECK(passed == 1);
  CHECK(std::string(epc_check_report_text(chk)).size() > 0);
  epc_check_report_destroy(chk);
  epc_config_destroy(cfg);
}
