#include "epc/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "epc/error.hpp"

namespace epc {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  fail(ErrorKind::kConfig, "config key '" + std::string(key) + "': cannot use '" +
                               std::string(value) + "' (expected " + std::string(want) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true|false");
}

std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::kX: return "x";
    case Axis::kY: return "y";
    case Axis::kZ: return "z";
  }
  return "z";
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define EPC_DOUBLE(KEY, FIELD)                                                     \
  Entry {                                                                          \
    KEY, [](RunConfig& c, std::string_view v) { c.FIELD = to_double(KEY, v); },    \
        [](const RunConfig& c) { return fmt_double(c.FIELD); }                     \
  }
#define EPC_COUNT(KEY, FIELD)                                                      \
  Entry {                                                                          \
    KEY,                                                                           \
        [](RunConfig& c, std::string_view v) {                                     \
          c.FIELD = static_cast<decltype(c.FIELD)>(to_u64(KEY, v));                \
        },                                                                         \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                 \
  }
#define EPC_BOOL(KEY, FIELD)                                                       \
  Entry {                                                                          \
    KEY, [](RunConfig& c, std::string_view v) { c.FIELD = to_bool(KEY, v); },      \
        [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); } \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      EPC_COUNT("seed", seed),

      EPC_COUNT("scene.count", scene_count),
      EPC_COUNT("scene.clusters", scene.num_clusters),
      EPC_COUNT("scene.points_per_cluster", scene.points_per_cluster),
      EPC_DOUBLE("scene.cluster_std", scene.cluster_std),
      EPC_DOUBLE("scene.color_noise", scene.color_noise_std),
      EPC_DOUBLE("scene.room_extent", scene.room_extent),

      EPC_COUNT("kmeans.segments", kmeans.target_segments),
      EPC_COUNT("kmeans.max_iters", kmeans.max_iters),
      EPC_DOUBLE("kmeans.tol", kmeans.tol),
      EPC_DOUBLE("kmeans.color_weight", kmeans.color_weight),

      EPC_DOUBLE("augment.scale_min", train.augment.scale_min),
      EPC_DOUBLE("augment.scale_max", train.augment.scale_max),
      Entry{"augment.rot_axis",
            [](RunConfig& c, std::string_view v) {
              if (v == "x") c.train.augment.rot_axis = Axis::kX;
              else if (v == "y") c.train.augment.rot_axis = Axis::kY;
              else if (v == "z") c.train.augment.rot_axis = Axis::kZ;
              else bad_value("augment.rot_axis", v, "x|y|z");
            },
            [](const RunConfig& c) { return std::string(axis_name(c.train.augment.rot_axis)); }},
      EPC_DOUBLE("augment.rot_max", train.augment.rot_max),
      EPC_DOUBLE("augment.jitter_sigma", train.augment.jitter_sigma),
      EPC_DOUBLE("augment.jitter_clip", train.augment.jitter_clip),

      EPC_DOUBLE("loss.tau", train.loss.tau),
      EPC_DOUBLE("loss.lambda", train.loss.lambda),
      EPC_BOOL("loss.normalize_rows", train.loss.normalize_rows),
      EPC_BOOL("loss.normalize_channels", train.loss.normalize_channels),
      EPC_BOOL("loss.include_positive", train.loss.include_positive_in_denominator),
      Entry{"loss.reduction",
            [](RunConfig& c, std::string_view v) {
              if (v != "sum" && v != "mean") bad_value("loss.reduction", v, "sum|mean");
              c.train.loss.reduction = parse_reduction(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.train.loss.reduction)); }},
      Entry{"loss.neg_samples",
            [](RunConfig& c, std::string_view v) {
              const auto k = to_u64("loss.neg_samples", v);
              if (k == 0) c.train.loss.neg_sample_count.reset();
              else c.train.loss.neg_sample_count = static_cast<std::size_t>(k);
            },
            [](const RunConfig& c) {
              return std::to_string(c.train.loss.neg_sample_count.value_or(0));
            }},
      EPC_BOOL("loss.symmetric_ag", train.loss.symmetric_ag),

      Entry{"train.loss",
            [](RunConfig& c, std::string_view v) {
              if (v != "pc" && v != "ag" && v != "cc" && v != "ep") bad_value("train.loss", v, "pc|ag|cc|ep");
              c.train.loss_kind = parse_loss_kind(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.train.loss_kind)); }},
      EPC_COUNT("train.epochs", train.epochs),
      EPC_COUNT("train.batch_size", train.batch_size),
      EPC_DOUBLE("train.lr", train.base_lr),
      Entry{"train.lr_schedule",
            [](RunConfig& c, std::string_view v) {
              if (v == "cosine") c.train.lr_schedule = LrSchedule::kCosine;
              else if (v == "constant") c.train.lr_schedule = LrSchedule::kConstant;
              else bad_value("train.lr_schedule", v, "constant|cosine");
            },
            [](const RunConfig& c) {
              return std::string(c.train.lr_schedule == LrSchedule::kCosine ? "cosine" : "constant");
            }},
      EPC_DOUBLE("train.beta1", train.adam.beta1),
      EPC_DOUBLE("train.beta2", train.adam.beta2),
      EPC_DOUBLE("train.eps", train.adam.eps),
      EPC_COUNT("encoder.hidden", train.hidden),
      EPC_COUNT("encoder.channels", train.embed_dim),

      EPC_DOUBLE("probe.label_fraction", probe.label_fraction),
      EPC_COUNT("probe.iterations", probe.iterations),
      EPC_DOUBLE("probe.lr", probe.lr),
      EPC_DOUBLE("probe.l2", probe.l2),
      EPC_DOUBLE("probe.holdout", probe_holdout),

      EPC_COUNT("bench.m", bench.m),
      EPC_COUNT("bench.c", bench.c),
      EPC_COUNT("bench.repeats", bench.repeats),
      EPC_COUNT("bench.budget_bytes", bench.byte_budget),
      EPC_BOOL("bench.count_only", bench.count_only),
  };
  return entries;
}

#undef EPC_DOUBLE
#undef EPC_COUNT
#undef EPC_BOOL

const Entry& find(std::string_view key) {
  for (const auto& e : table())
    if (key == e.key) return e;
  fail(ErrorKind::kConfig, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

RunConfig::RunConfig() {
  // Desk-scale defaults: 32 scenes of 8 x 128 points, 32 segments, 32 channels.
  kmeans.target_segments = 32;
  propagate_seed();
}

void RunConfig::set(std::string_view key, std::string_view value) {
  find(key).set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find(key).get(*this); }

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, std::string(origin) + ":" + std::to_string(line_no) +
                                   ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      set(key, value);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void RunConfig::apply_environment() {
  if (const char* s = std::getenv("EPC_SEED"); s && *s) set("seed", s);
}

void RunConfig::propagate_seed() {
  const Rng root(seed);
  train.seed = root.substream("train").next_u64();
  train.augment.seed = root.substream("augment").next_u64();
  kmeans.seed = root.substream("kmeans").next_u64();
  scene.seed = root.substream("scene").next_u64();
  probe.seed = root.substream("probe").next_u64();
  bench.seed = root.substream("bench").next_u64();
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& e : table()) {
    out += e.key;
    out += " = ";
    out += e.get(*this);
    out += '\n';
  }
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : table()) v.emplace_back(e.key);
    return v;
  }();
  return names;
}

}  // namespace epc
