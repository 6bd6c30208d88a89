#include "epcontrast.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "epc/bench.hpp"
#include "epc/check.hpp"
#include "epc/config.hpp"
#include "epc/encoder.hpp"
#include "epc/error.hpp"
#include "epc/losses.hpp"
#include "epc/pointcloud.hpp"
#include "epc/superpoint.hpp"
#include "epc/trainer.hpp"

struct epc_config {
  epc::RunConfig run;
  std::string text;
  std::string value;
};

struct epc_cloud {
  epc::PointCloud cloud;
};

struct epc_segments {
  epc::SegmentAssignment seg;
};

struct epc_model {
  epc::MlpParams params;
};

struct epc_history {
  std::vector<epc::HistoryRow> rows;
  std::string csv;
};

struct epc_probe_result {
  epc::ProbeResult result;
  std::string warnings;
};

struct epc_bench_report {
  epc::BenchReport report;
  std::string text;
};

struct epc_check_report {
  std::string text;
};

namespace {

thread_local std::string g_last_error;

epc_status status_of(epc::ErrorKind kind) {
  using epc::ErrorKind;
  switch (kind) {
    case ErrorKind::kShape: return EPC_ERR_SHAPE;
    case ErrorKind::kEmptyReduction: return EPC_ERR_EMPTY_REDUCTION;
    case ErrorKind::kParse: return EPC_ERR_PARSE;
    case ErrorKind::kRange: return EPC_ERR_RANGE;
    case ErrorKind::kFormat: return EPC_ERR_FORMAT;
    case ErrorKind::kLength: return EPC_ERR_LENGTH;
    case ErrorKind::kPartition: return EPC_ERR_PARTITION;
    case ErrorKind::kCache: return EPC_ERR_CACHE;
    case ErrorKind::kBudget: return EPC_ERR_BUDGET;
    case ErrorKind::kDomain: return EPC_ERR_DOMAIN;
    case ErrorKind::kConfig: return EPC_ERR_CONFIG;
    case ErrorKind::kIo: return EPC_ERR_IO;
    case ErrorKind::kInvalidArgument: return EPC_ERR_INVALID_ARGUMENT;
  }
  return EPC_ERR_INTERNAL;
}

template <typename F>
epc_status guard(F&& body) {
  try {
    body();
    return EPC_OK;
  } catch (const epc::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EPC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EPC_ERR_INTERNAL;
  }
}

void require(bool cond, const char* what) {
  if (!cond) epc::fail(epc::ErrorKind::kInvalidArgument, what);
}

epc::LossKind kind_of(epc_loss_kind k) {
  switch (k) {
    case EPC_LOSS_PC: return epc::LossKind::kPC;
    case EPC_LOSS_AG: return epc::LossKind::kAG;
    case EPC_LOSS_CC: return epc::LossKind::kCC;
    case EPC_LOSS_EP: return epc::LossKind::kEP;
  }
  epc::fail(epc::ErrorKind::kInvalidArgument, "unknown loss kind");
}

epc::Matrix matrix_from(const double* data, std::size_t rows, std::size_t cols) {
  require(data != nullptr, "null matrix data");
  return epc::Matrix(rows, cols, std::vector<double>(data, data + rows * cols));
}

void copy_out(std::span<const double> src, double* out, std::size_t capacity) {
  require(out != nullptr, "null output buffer");
  if (capacity < src.size()) {
    epc::fail(epc::ErrorKind::kLength, "output buffer holds " + std::to_string(capacity) +
                                           " values, need " + std::to_string(src.size()));
  }
  std::copy(src.begin(), src.end(), out);
}

std::vector<epc::PointCloud> clouds_from(const epc_cloud* const* clouds, std::size_t count) {
  require(clouds != nullptr || count == 0, "null scene array");
  std::vector<epc::PointCloud> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    require(clouds[i] != nullptr, "null scene handle");
    out.push_back(clouds[i]->cloud);
  }
  return out;
}

}  // namespace

extern "C" {

const char* epc_version(void) { return "1.0.0"; }

const char* epc_last_error(void) { return g_last_error.c_str(); }

const char* epc_status_name(epc_status status) {
  switch (status) {
    case EPC_OK: return "ok";
    case EPC_ERR_SHAPE: return "shape error";
    case EPC_ERR_EMPTY_REDUCTION: return "empty reduction";
    case EPC_ERR_PARSE: return "parse error";
    case EPC_ERR_RANGE: return "range error";
    case EPC_ERR_FORMAT: return "format error";
    case EPC_ERR_LENGTH: return "length error";
    case EPC_ERR_PARTITION: return "partition error";
    case EPC_ERR_CACHE: return "cache error";
    case EPC_ERR_BUDGET: return "budget error";
    case EPC_ERR_DOMAIN: return "domain error";
    case EPC_ERR_CONFIG: return "config error";
    case EPC_ERR_IO: return "io error";
    case EPC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EPC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

epc_status epc_parse_loss_kind(const char* name, epc_loss_kind* out) {
  return guard([&] {
    require(name && out, "null argument");
    switch (epc::parse_loss_kind(name)) {
      case epc::LossKind::kPC: *out = EPC_LOSS_PC; break;
      case epc::LossKind::kAG: *out = EPC_LOSS_AG; break;
      case epc::LossKind::kCC: *out = EPC_LOSS_CC; break;
      case epc::LossKind::kEP: *out = EPC_LOSS_EP; break;
    }
  });
}

epc_status epc_config_create(epc_config** out) {
  return guard([&] {
    require(out, "null output handle");
    *out = new epc_config();
  });
}

void epc_config_destroy(epc_config* cfg) { delete cfg; }

epc_status epc_config_set(epc_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg && key && value, "null argument");
    cfg->run.set(key, value);
  });
}

epc_status epc_config_get(const epc_config* cfg, const char* key, const char** value) {
  return guard([&] {
    require(cfg && key && value, "null argument");
    auto* mut = const_cast<epc_config*>(cfg);
    mut->value = cfg->run.get(key);
    *value = mut->value.c_str();
  });
}

epc_status epc_config_load_file(epc_config* cfg, const char* path) {
  return guard([&] {
    require(cfg && path, "null argument");
    cfg->run.load_file(path);
  });
}

epc_status epc_config_apply_environment(epc_config* cfg) {
  return guard([&] {
    require(cfg, "null config");
    cfg->run.apply_environment();
  });
}

epc_status epc_config_finalize(epc_config* cfg) {
  return guard([&] {
    require(cfg, "null config");
    cfg->run.propagate_seed();
  });
}

const char* epc_config_resolved(epc_config* cfg) {
  if (!cfg) return "";
  cfg->text = cfg->run.resolved();
  return cfg->text.c_str();
}

epc_status epc_cloud_create(size_t n, const double* positions, const double* colors,
                            const uint32_t* labels, epc_cloud** out) {
  return guard([&] {
    require(out, "null output handle");
    epc::PointCloud cloud;
    cloud.positions = matrix_from(positions, n, 3);
    cloud.colors = matrix_from(colors, n, 3);
    if (labels) cloud.labels = std::vector<std::uint32_t>(labels, labels + n);
    cloud.validate();
    *out = new epc_cloud{std::move(cloud)};
  });
}

epc_status epc_cloud_load(const char* path, epc_cloud** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new epc_cloud{epc::load_cloud(path)};
  });
}

epc_status epc_cloud_save_binary(const epc_cloud* cloud, const char* path) {
  return guard([&] {
    require(cloud && path, "null argument");
    epc::save_binary(cloud->cloud, path);
  });
}

epc_status epc_cloud_save_ascii(const epc_cloud* cloud, const char* path) {
  return guard([&] {
    require(cloud && path, "null argument");
    epc::save_ascii(cloud->cloud, path);
  });
}

void epc_cloud_destroy(epc_cloud* cloud) { delete cloud; }

size_t epc_cloud_size(const epc_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

int epc_cloud_has_labels(const epc_cloud* cloud) {
  return cloud && cloud->cloud.has_labels() ? 1 : 0;
}

epc_status epc_cloud_positions(const epc_cloud* cloud, double* out, size_t capacity) {
  return guard([&] {
    require(cloud, "null cloud");
    copy_out(cloud->cloud.positions.data(), out, capacity);
  });
}

epc_status epc_cloud_colors(const epc_cloud* cloud, double* out, size_t capacity) {
  return guard([&] {
    require(cloud, "null cloud");
    copy_out(cloud->cloud.colors.data(), out, capacity);
  });
}

epc_status epc_cloud_labels(const epc_cloud* cloud, uint32_t* out, size_t capacity) {
  return guard([&] {
    require(cloud && out, "null argument");
    if (!cloud->cloud.labels) epc::fail(epc::ErrorKind::kInvalidArgument, "cloud has no labels");
    const auto& l = *cloud->cloud.labels;
    if (capacity < l.size()) epc::fail(epc::ErrorKind::kLength, "label buffer too small");
    std::copy(l.begin(), l.end(), out);
  });
}

epc_status epc_scene_generate(const epc_config* cfg, uint64_t index, epc_cloud** out) {
  return guard([&] {
    require(cfg && out, "null argument");
    epc::Rng stream = epc::Rng(cfg->run.scene.seed).substream(index);
    *out = new epc_cloud{epc::generate_scene(cfg->run.scene, stream)};
  });
}

epc_status epc_cloud_view_pair(const epc_cloud* cloud, const epc_config* cfg, uint64_t seed,
                               epc_cloud** view1, epc_cloud** view2) {
  return guard([&] {
    require(cloud && cfg && view1 && view2, "null argument");
    epc::ViewPair pair = epc::make_view_pair(cloud->cloud, cfg->run.train.augment, seed);
    auto a = std::make_unique<epc_cloud>(epc_cloud{std::move(pair.view1)});
    auto b = std::make_unique<epc_cloud>(epc_cloud{std::move(pair.view2)});
    *view1 = a.release();
    *view2 = b.release();
  });
}

epc_status epc_segments_kmeans(const epc_cloud* cloud, const epc_config* cfg,
                               size_t target_segments, epc_segments** out, int* clamped) {
  return guard([&] {
    require(cloud && cfg && out, "null argument");
    epc::KMeansConfig kc = cfg->run.kmeans;
    if (target_segments > 0) kc.target_segments = target_segments;
    if (clamped) *clamped = kc.target_segments > cloud->cloud.size() ? 1 : 0;
    *out = new epc_segments{epc::kmeans_segments(cloud->cloud, kc)};
  });
}

epc_status epc_segments_create(size_t n, const uint32_t* segment_of, size_t num_segments,
                               epc_segments** out) {
  return guard([&] {
    require(segment_of && out, "null argument");
    epc::SegmentAssignment seg;
    seg.segment_of.assign(segment_of, segment_of + n);
    seg.num_segments = num_segments;
    seg.validate();
    *out = new epc_segments{std::move(seg)};
  });
}

void epc_segments_destroy(epc_segments* seg) { delete seg; }

size_t epc_segments_count(const epc_segments* seg) { return seg ? seg->seg.num_segments : 0; }

size_t epc_segments_points(const epc_segments* seg) { return seg ? seg->seg.num_points() : 0; }

epc_status epc_segments_ids(const epc_segments* seg, uint32_t* out, size_t capacity) {
  return guard([&] {
    require(seg && out, "null argument");
    if (capacity < seg->seg.num_points()) epc::fail(epc::ErrorKind::kLength, "id buffer too small");
    std::copy(seg->seg.segment_of.begin(), seg->seg.segment_of.end(), out);
  });
}

epc_status epc_segments_save(const epc_segments* seg, const char* path) {
  return guard([&] {
    require(seg && path, "null argument");
    std::ofstream f(path);
    if (!f) epc::fail(epc::ErrorKind::kIo, std::string("cannot write ") + path);
    for (auto id : seg->seg.segment_of) f << id << '\n';
  });
}

epc_status epc_loss_eval(epc_loss_kind kind, size_t n, size_t c, const double* f1,
                         const double* f2, const epc_segments* seg, const epc_config* cfg,
                         uint64_t sample_seed, double* value, double* grad_f1, double* grad_f2) {
  return guard([&] {
    require(cfg && value, "null argument");
    const epc::Matrix a = matrix_from(f1, n, c);
    const epc::Matrix b = matrix_from(f2, n, c);
    epc::Rng stream(sample_seed);
    const epc::LossOutput out = epc::compute_loss(kind_of(kind), a, b, seg ? &seg->seg : nullptr,
                                                  cfg->run.train.loss, &stream);
    *value = out.value;
    if (grad_f1) copy_out(out.grad_f1.data(), grad_f1, n * c);
    if (grad_f2) copy_out(out.grad_f2.data(), grad_f2, n * c);
  });
}

epc_status epc_loss_oracle(epc_loss_kind kind, size_t n, size_t c, const double* f1,
                           const double* f2, const epc_segments* seg, const epc_config* cfg,
                           double* value) {
  return guard([&] {
    require(cfg && value, "null argument");
    *value = epc::brute_force_loss(kind_of(kind), matrix_from(f1, n, c), matrix_from(f2, n, c),
                                   seg ? &seg->seg : nullptr, cfg->run.train.loss);
  });
}

epc_status epc_count_pairs(epc_loss_kind kind, uint64_t n, uint64_t m, uint64_t c,
                           uint64_t* positives, uint64_t* negatives) {
  return guard([&] {
    require(positives && negatives, "null argument");
    const epc::PairCount pc = epc::count_pairs(kind_of(kind), n, m, c);
    *positives = pc.positives;
    *negatives = pc.negatives;
  });
}

epc_status epc_model_init(const epc_config* cfg, epc_model** out) {
  return guard([&] {
    require(cfg && out, "null argument");
    const auto& t = cfg->run.train;
    *out = new epc_model{epc::encoder_init(epc::kEncoderInputDim, t.hidden, t.embed_dim, t.seed)};
  });
}

epc_status epc_model_load(const char* path, epc_model** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new epc_model{epc::load_checkpoint(path)};
  });
}

epc_status epc_model_save(const epc_model* model, const char* path) {
  return guard([&] {
    require(model && path, "null argument");
    epc::save_checkpoint(model->params, path);
  });
}

void epc_model_destroy(epc_model* model) { delete model; }

uint64_t epc_model_hash(const epc_model* model) {
  return model ? epc::checkpoint_hash(model->params) : 0;
}

size_t epc_model_channels(const epc_model* model) {
  return model ? model->params.output_dim() : 0;
}

epc_status epc_model_embed(const epc_model* model, const epc_cloud* cloud, double* out,
                           size_t capacity) {
  return guard([&] {
    require(model && cloud, "null argument");
    copy_out(epc::encoder_forward(model->params, cloud->cloud).data(), out, capacity);
  });
}

epc_status epc_pretrain(const epc_config* cfg, const epc_cloud* const* scenes, size_t count,
                        epc_step_callback on_step, void* userdata, epc_model** model,
                        epc_history** history) {
  return guard([&] {
    require(cfg, "null config");
    const auto clouds = clouds_from(scenes, count);
    epc::StepCallback cb;
    if (on_step) {
      cb = [&](const epc::HistoryRow& r) { on_step(r.step, r.epoch, r.loss, r.lr, userdata); };
    }
    epc::PretrainResult res = epc::pretrain(clouds, cfg->run.train, cfg->run.kmeans, cb);
    std::unique_ptr<epc_model> m(new epc_model{std::move(res.params)});
    std::unique_ptr<epc_history> h(new epc_history{std::move(res.history), {}});
    if (model) *model = m.release();
    if (history) *history = h.release();
  });
}

void epc_history_destroy(epc_history* history) { delete history; }

size_t epc_history_length(const epc_history* history) { return history ? history->rows.size() : 0; }

epc_status epc_history_loss(const epc_history* history, double* out, size_t capacity) {
  return guard([&] {
    require(history, "null history");
    std::vector<double> losses;
    for (const auto& r : history->rows) losses.push_back(r.loss);
    copy_out(losses, out, capacity);
  });
}

const char* epc_history_csv(epc_history* history) {
  if (!history) return "";
  history->csv = epc::history_csv(history->rows);
  return history->csv.c_str();
}

epc_status epc_probe(const epc_model* model, const epc_config* cfg, const epc_cloud* const* train,
                     size_t train_count, const epc_cloud* const* test, size_t test_count,
                     epc_probe_result** out) {
  return guard([&] {
    require(model && cfg && out, "null argument");
    auto res = epc::linear_probe(model->params, clouds_from(train, train_count),
                                 clouds_from(test, test_count), cfg->run.probe);
    std::string warnings;
    for (const auto& w : res.warnings) warnings += w + "\n";
    *out = new epc_probe_result{std::move(res), std::move(warnings)};
  });
}

void epc_probe_result_destroy(epc_probe_result* result) { delete result; }

double epc_probe_accuracy(const epc_probe_result* result) {
  return result ? result->result.accuracy : 0.0;
}

const char* epc_probe_warnings(const epc_probe_result* result) {
  return result ? result->warnings.c_str() : "";
}

epc_status epc_channel_redundancy(const epc_model* model, const epc_cloud* const* scenes,
                                  size_t count, double* out) {
  return guard([&] {
    require(model && out, "null argument");
    *out = epc::channel_redundancy(model->params, clouds_from(scenes, count));
  });
}

epc_status epc_bench(const epc_config* cfg, epc_loss_kind kind, const size_t* sizes, size_t count,
                     epc_bench_report** out) {
  return guard([&] {
    require(cfg && out && (sizes || count == 0), "null argument");
    epc::BenchConfig bc = cfg->run.bench;
    bc.kind = kind_of(kind);
    bc.loss = cfg->run.train.loss;
    if (count > 0) bc.sizes.assign(sizes, sizes + count);
    *out = new epc_bench_report{epc::bench_loss(bc), {}};
  });
}

void epc_bench_report_destroy(epc_bench_report* report) { delete report; }

const char* epc_bench_report_csv(epc_bench_report* report) {
  if (!report) return "";
  report->text = report->report.csv();
  return report->text.c_str();
}

const char* epc_bench_report_table(epc_bench_report* report) {
  if (!report) return "";
  report->text = report->report.table();
  return report->text.c_str();
}

double epc_bench_report_exponent(const epc_bench_report* report) {
  return report ? report->report.negatives_exponent : 0.0;
}

epc_status epc_fit_exponent(const double* sizes, const double* measurements, size_t count,
                            double* out) {
  return guard([&] {
    require(sizes && measurements && out, "null argument");
    *out = epc::fit_exponent(std::span<const double>(sizes, count),
                             std::span<const double>(measurements, count));
  });
}

epc_status epc_self_check(uint64_t seed, size_t oracle_instances, size_t gradient_instances,
                          epc_check_report** out, int* passed) {
  return guard([&] {
    require(out && passed, "null argument");
    std::ostringstream os;
    bool ok = true;
    for (const auto& suite : {epc::oracle_equivalence_suite(seed, oracle_instances),
                              epc::gradient_check_suite(seed, gradient_instances)}) {
      os << (suite.passed() ? "PASS " : "FAIL ") << suite.name << ": " << suite.cases
         << " cases, " << suite.failures << " failures, worst error " << suite.worst << "\n";
      for (std::size_t i = 0; i < suite.messages.size() && i < 10; ++i) {
        os << "  " << suite.messages[i] << "\n";
      }
      ok = ok && suite.passed();
    }
    *passed = ok ? 1 : 0;
    *out = new epc_check_report{os.str()};
  });
}

void epc_check_report_destroy(epc_check_report* report) { delete report; }

const char* epc_check_report_text(const epc_check_report* report) {
  return report ? report->text.c_str() : "";
}

}  // extern "C"
