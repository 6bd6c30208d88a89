#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epc/bench.hpp"
#include "epc/superpoint.hpp"
#include "epc/trainer.hpp"

namespace epc {

/// Every tunable of a run, addressed by dot-namespaced keys
/// (`loss.tau`, `kmeans.segments`, ...). Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  KMeansConfig kmeans;
  SyntheticSceneConfig scene;
  std::size_t scene_count = 32;
  ProbeConfig probe;
  double probe_holdout = 0.25;  // fraction of scenes held out for probe scoring
  BenchConfig bench;

  RunConfig();

  /// Throws kConfig naming the key on unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// `key = value` lines, '#' comments, blank lines ignored.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "<text>");

  /// Applies EPC_SEED from the environment if present.
  void apply_environment();

  /// Pushes `seed` into every sub-config.
  void propagate_seed();

  /// Every key with its current value, one `key = value` per line.
  std::string resolved() const;

  static const std::vector<std::string>& keys();
};

}  // namespace epc
