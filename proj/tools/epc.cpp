// Command-line front end. Everything goes through the C API in epcontrast.h.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "epcontrast.h"

namespace fs = std::filesystem;

namespace {

struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(epc_status st) {
  if (st != EPC_OK) {
    throw RuntimeError(std::string(epc_status_name(st)) + ": " + epc_last_error());
  }
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};

using ConfigPtr = std::unique_ptr<epc_config, Deleter<epc_config, epc_config_destroy>>;
using CloudPtr = std::unique_ptr<epc_cloud, Deleter<epc_cloud, epc_cloud_destroy>>;
using SegmentsPtr = std::unique_ptr<epc_segments, Deleter<epc_segments, epc_segments_destroy>>;
using ModelPtr = std::unique_ptr<epc_model, Deleter<epc_model, epc_model_destroy>>;
using HistoryPtr = std::unique_ptr<epc_history, Deleter<epc_history, epc_history_destroy>>;
using ProbePtr =
    std::unique_ptr<epc_probe_result, Deleter<epc_probe_result, epc_probe_result_destroy>>;
using BenchPtr =
    std::unique_ptr<epc_bench_report, Deleter<epc_bench_report, epc_bench_report_destroy>>;
using CheckPtr =
    std::unique_ptr<epc_check_report, Deleter<epc_check_report, epc_check_report_destroy>>;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Config file of 'key = value' lines");
  cmd->add_option("--set", opts.overrides, "Override a config key: --set key=value")
      ->take_all();
  cmd->add_option("--seed", opts.seed, "Master seed (overrides config and EPC_SEED)");
}

// defaults < config file < EPC_SEED < flags
ConfigPtr resolve_config(const CommonOptions& opts,
                         const std::vector<std::pair<std::string, std::string>>& flag_values) {
  epc_config* raw = nullptr;
  check(epc_config_create(&raw));
  ConfigPtr cfg(raw);
  if (!opts.config_path.empty()) check(epc_config_load_file(cfg.get(), opts.config_path.c_str()));
  check(epc_config_apply_environment(cfg.get()));
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw RuntimeError("--set expects key=value, got '" + kv + "'");
    check(epc_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  for (const auto& [k, v] : flag_values) check(epc_config_set(cfg.get(), k.c_str(), v.c_str()));
  if (opts.seed) check(epc_config_set(cfg.get(), "seed", std::to_string(*opts.seed).c_str()));
  check(epc_config_finalize(cfg.get()));

  std::string resolved = epc_config_resolved(cfg.get());
  std::cout << "# resolved configuration\n";
  std::size_t start = 0;
  while (start < resolved.size()) {
    const auto end = resolved.find('\n', start);
    std::cout << "# " << resolved.substr(start, end - start) << '\n';
    start = end + 1;
  }
  std::cout.flush();
  return cfg;
}

std::string config_value(const epc_config* cfg, const char* key) {
  const char* v = nullptr;
  check(epc_config_get(cfg, key, &v));
  return v;
}

std::vector<fs::path> scene_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw RuntimeError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".epcc" || ext == ".txt" || ext == ".xyz") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw RuntimeError("no scene files (.epcc/.txt/.xyz) in " + dir.string());
  return files;
}

std::vector<CloudPtr> load_scenes(const std::vector<fs::path>& files) {
  std::vector<CloudPtr> clouds;
  for (const auto& f : files) {
    epc_cloud* raw = nullptr;
    check(epc_cloud_load(f.string().c_str(), &raw));
    clouds.emplace_back(raw);
  }
  return clouds;
}

std::vector<const epc_cloud*> views_of(const std::vector<CloudPtr>& clouds, std::size_t begin,
                                       std::size_t end) {
  std::vector<const epc_cloud*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(clouds[i].get());
  return out;
}

int run_gen(const CommonOptions& common, const std::string& out_dir, std::optional<std::size_t> scenes,
            std::optional<std::size_t> clusters, std::optional<std::size_t> per_cluster) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (scenes) flags.emplace_back("scene.count", std::to_string(*scenes));
  if (clusters) flags.emplace_back("scene.clusters", std::to_string(*clusters));
  if (per_cluster) flags.emplace_back("scene.points_per_cluster", std::to_string(*per_cluster));
  auto cfg = resolve_config(common, flags);
  const std::size_t count = std::stoull(config_value(cfg.get(), "scene.count"));
  fs::create_directories(out_dir);
  for (std::size_t k = 0; k < count; ++k) {
    epc_cloud* raw = nullptr;
    check(epc_scene_generate(cfg.get(), k, &raw));
    CloudPtr cloud(raw);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu.epcc", k);
    const fs::path path = fs::path(out_dir) / name;
    check(epc_cloud_save_binary(cloud.get(), path.string().c_str()));
  }
  std::cout << "wrote " << count << " scenes to " << out_dir << '\n';
  return 0;
}

int run_segment(const CommonOptions& common, const std::string& in, std::optional<std::size_t> segments,
                const std::string& out) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (segments) flags.emplace_back("kmeans.segments", std::to_string(*segments));
  auto cfg = resolve_config(common, flags);
  epc_cloud* raw = nullptr;
  check(epc_cloud_load(in.c_str(), &raw));
  CloudPtr cloud(raw);
  epc_segments* seg_raw = nullptr;
  int clamped = 0;
  check(epc_segments_kmeans(cloud.get(), cfg.get(), 0, &seg_raw, &clamped));
  SegmentsPtr seg(seg_raw);
  if (clamped) {
    std::cerr << "warning: requested " << config_value(cfg.get(), "kmeans.segments")
              << " segments but the cloud has " << epc_cloud_size(cloud.get())
              << " points; clamped to " << epc_segments_count(seg.get()) << '\n';
  }
  check(epc_segments_save(seg.get(), out.c_str()));
  std::cout << "segments " << epc_segments_count(seg.get()) << " points "
            << epc_segments_points(seg.get()) << '\n';
  return 0;
}

void on_step(uint64_t step, uint64_t epoch, double loss, double lr, void*) {
  if (step % 50 == 0) {
    std::fprintf(stderr, "step %llu epoch %llu loss %.6f lr %.6g\n",
                 static_cast<unsigned long long>(step), static_cast<unsigned long long>(epoch),
                 loss, lr);
  }
}

int run_pretrain(const CommonOptions& common, const std::string& data, const std::string& out,
                 std::optional<std::string> loss, std::optional<std::size_t> epochs,
                 std::string history_path) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (loss) flags.emplace_back("train.loss", *loss);
  if (epochs) flags.emplace_back("train.epochs", std::to_string(*epochs));
  auto cfg = resolve_config(common, flags);
  const auto clouds = load_scenes(scene_files(data));
  const auto scenes = views_of(clouds, 0, clouds.size());

  epc_model* model_raw = nullptr;
  epc_history* hist_raw = nullptr;
  check(epc_pretrain(cfg.get(), scenes.data(), scenes.size(), on_step, nullptr, &model_raw,
                     &hist_raw));
  ModelPtr model(model_raw);
  HistoryPtr history(hist_raw);
  check(epc_model_save(model.get(), out.c_str()));
  if (history_path.empty()) history_path = out + ".csv";
  std::ofstream csv(history_path);
  if (!csv) throw RuntimeError("cannot write " + history_path);
  csv << epc_history_csv(history.get());

  std::vector<double> losses(epc_history_length(history.get()));
  check(epc_history_loss(history.get(), losses.data(), losses.size()));
  std::printf("steps %zu first_loss %.6f final_loss %.6f\n", losses.size(), losses.front(),
              losses.back());
  std::printf("checkpoint %s hash %016llx\n", out.c_str(),
              static_cast<unsigned long long>(epc_model_hash(model.get())));
  std::printf("history %s\n", history_path.c_str());
  return 0;
}

int run_probe(const CommonOptions& common, const std::string& ckpt, const std::string& data,
              std::optional<double> fraction) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (fraction) flags.emplace_back("probe.label_fraction", std::to_string(*fraction));
  auto cfg = resolve_config(common, flags);
  epc_model* model_raw = nullptr;
  check(epc_model_load(ckpt.c_str(), &model_raw));
  ModelPtr model(model_raw);

  const auto clouds = load_scenes(scene_files(data));
  if (clouds.size() < 2) throw RuntimeError("probe needs at least 2 scenes (train + held-out)");
  const double holdout = std::stod(config_value(cfg.get(), "probe.holdout"));
  auto held = static_cast<std::size_t>(std::ceil(holdout * static_cast<double>(clouds.size())));
  held = std::clamp<std::size_t>(held, 1, clouds.size() - 1);
  const auto train = views_of(clouds, 0, clouds.size() - held);
  const auto test = views_of(clouds, clouds.size() - held, clouds.size());

  epc_probe_result* res_raw = nullptr;
  check(epc_probe(model.get(), cfg.get(), train.data(), train.size(), test.data(), test.size(),
                  &res_raw));
  ProbePtr res(res_raw);
  const std::string warnings = epc_probe_warnings(res.get());
  if (!warnings.empty()) std::cerr << "warning: " << warnings;
  std::printf("train_scenes %zu test_scenes %zu\n", train.size(), test.size());
  std::printf("accuracy %.6f\n", epc_probe_accuracy(res.get()));
  return 0;
}

int run_bench(const CommonOptions& common, const std::string& kind, const std::vector<std::size_t>& sizes,
              std::optional<std::size_t> m, std::optional<std::size_t> c,
              std::optional<std::size_t> repeats, std::optional<std::uint64_t> budget) {
  std::vector<std::pair<std::string, std::string>> flags;
  if (m) flags.emplace_back("bench.m", std::to_string(*m));
  if (c) flags.emplace_back("bench.c", std::to_string(*c));
  if (repeats) flags.emplace_back("bench.repeats", std::to_string(*repeats));
  if (budget) flags.emplace_back("bench.budget_bytes", std::to_string(*budget));
  auto cfg = resolve_config(common, flags);
  epc_loss_kind k{};
  check(epc_parse_loss_kind(kind.c_str(), &k));
  epc_bench_report* raw = nullptr;
  check(epc_bench(cfg.get(), k, sizes.data(), sizes.size(), &raw));
  BenchPtr report(raw);
  std::cout << epc_bench_report_csv(report.get()) << '\n' << epc_bench_report_table(report.get());
  return 0;
}

int run_check(std::uint64_t seed, std::size_t instances, std::size_t grad_instances) {
  epc_check_report* raw = nullptr;
  int passed = 0;
  check(epc_self_check(seed, instances, grad_instances, &raw, &passed));
  CheckPtr report(raw);
  std::cout << epc_check_report_text(report.get());
  std::cout << (passed ? "check passed\n" : "check FAILED\n");
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epc: point-level and superpoint contrastive pre-training toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", epc_version());

  CommonOptions common;

  auto* gen = app.add_subcommand("gen", "Write synthetic labeled scenes as EPCC files");
  std::string gen_out;
  std::optional<std::size_t> gen_scenes, gen_clusters, gen_ppc;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--scenes", gen_scenes, "Number of scenes");
  gen->add_option("--clusters", gen_clusters, "Clusters (classes) per scene");
  gen->add_option("--points-per-cluster", gen_ppc, "Points per cluster");
  add_common(gen, common);

  auto* seg = app.add_subcommand("segment", "K-means superpoints of one cloud");
  std::string seg_in, seg_out;
  std::optional<std::size_t> seg_m;
  seg->add_option("--in", seg_in, "Input cloud (EPCC or ASCII)")->required();
  seg->add_option("--segments", seg_m, "Target number of segments M");
  seg->add_option("--out", seg_out, "Output file, one segment id per line")->required();
  add_common(seg, common);

  auto* pre = app.add_subcommand("pretrain", "Contrastive pre-training of the point encoder");
  std::string pre_data, pre_out, pre_hist;
  std::optional<std::string> pre_loss;
  std::optional<std::size_t> pre_epochs;
  pre->add_option("--data", pre_data, "Directory of scenes")->required();
  pre->add_option("--out", pre_out, "Checkpoint path (EPCK)")->required();
  pre->add_option("--loss", pre_loss, "Objective")->check(CLI::IsMember({"pc", "ag", "cc", "ep"}));
  pre->add_option("--epochs", pre_epochs, "Epochs");
  pre->add_option("--history", pre_hist, "Loss history CSV (default: <out>.csv)");
  add_common(pre, common);

  auto* probe = app.add_subcommand("probe", "Linear-probe accuracy of a frozen encoder");
  std::string probe_ckpt, probe_data;
  std::optional<double> probe_frac;
  probe->add_option("--ckpt", probe_ckpt, "Checkpoint path (EPCK)")->required();
  probe->add_option("--data", probe_data, "Directory of labeled scenes")->required();
  probe->add_option("--label-fraction", probe_frac, "Fraction of training points labeled")
      ->check(CLI::Range(0.0, 1.0));
  add_common(probe, common);

  auto* bench = app.add_subcommand("bench", "Pair-count, accounted-memory and timing scaling");
  std::string bench_kind = "pc";
  std::vector<std::size_t> bench_sizes = {1000, 2000, 4000, 8000};
  std::optional<std::size_t> bench_m, bench_c, bench_rep;
  std::optional<std::uint64_t> bench_budget;
  bench->add_option("--kind", bench_kind, "Loss")->check(CLI::IsMember({"pc", "ag", "cc", "ep"}));
  bench->add_option("--sizes", bench_sizes, "Ascending point counts")->delimiter(',');
  bench->add_option("--m", bench_m, "Segments for ag/ep");
  bench->add_option("--c", bench_c, "Embedding channels");
  bench->add_option("--repeats", bench_rep, "Timed repeats per size (>= 3)");
  bench->add_option("--budget", bench_budget, "Accounted byte budget");
  add_common(bench, common);

  auto* chk = app.add_subcommand("check", "Oracle-equivalence and gradient-check suites");
  std::uint64_t chk_seed = 0;
  std::size_t chk_inst = 100, chk_grad = 20;
  chk->add_option("--seed", chk_seed, "Seed");
  chk->add_option("--instances", chk_inst, "Random instances for the oracle suite");
  chk->add_option("--grad-instances", chk_grad, "Instances per loss for gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen(common, gen_out, gen_scenes, gen_clusters, gen_ppc);
    if (seg->parsed()) return run_segment(common, seg_in, seg_m, seg_out);
    if (pre->parsed()) return run_pretrain(common, pre_data, pre_out, pre_loss, pre_epochs, pre_hist);
    if (probe->parsed()) return run_probe(common, probe_ckpt, probe_data, probe_frac);
    if (bench->parsed()) {
      return run_bench(common, bench_kind, bench_sizes, bench_m, bench_c, bench_rep, bench_budget);
    }
    if (chk->parsed()) return run_check(chk_seed, chk_inst, chk_grad);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
