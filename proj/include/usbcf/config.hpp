#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "usbcf/common.hpp"

namespace usbcf {

/// Every setting of a run. Defaults are the published experimental settings
/// for MovieLens-100k.
struct RunConfig {
  std::string data = "data/ml-100k/u.data";
  /// "canonical": u1..u5 base/test files next to the ratings when present,
  /// otherwise the same contiguous-block scheme; "random": seeded k-fold.
  std::string split = "canonical";
  int folds = 5;
  std::uint64_t seed = 42;
  double scale_min = 1.0;
  double scale_max = 5.0;

  std::string model = "usbcf";
  /// Fallback members tried in order after `model`.
  std::vector<std::string> chain;
  /// Baseline model for a paired t-test on per-fold MAE.
  std::optional<std::string> compare;

  std::vector<int> min_cols{3, 5, 7, 10, 15, 20};
  int min_rows = 2;
  double min_sim = 0.25;
  std::size_t nnbics = 50;
  int k = 20;
  int inner_k = 20;
  int r = 3;
  int s = 3;
  int iters = 20;
  double lambda_item = 10.0;
  double lambda_user = 10.0;
  /// Significance filter level; absent = no filtering.
  std::optional<double> alpha;
  std::size_t max_biclusters = 500000;
  std::size_t max_branching = 0;
  std::string centering = "item";

  int threads = 1;
  std::string cache_dir = ".usbcf-cache";
  std::string output_dir = "results";
  /// Bicluster solution file to import instead of mining. "{fold}" is
  /// replaced by the 1-based fold number.
  std::optional<std::string> biclusters;
};

struct ConfigKey {
  std::string_view name;
  std::string_view doc;
};

/// Keys in their stable order with one-line documentation.
const std::vector<ConfigKey>& config_keys();

/// Key -> "default" | "file" | "flag".
using ConfigSources = std::map<std::string, std::string>;

/// Parses `text` into the named field. Lists are comma separated; "none"
/// clears optional fields. Throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view text);

/// Applies a JSON object of settings (values may be strings, numbers,
/// booleans or arrays) and marks each key with `source`.
void apply_config_json(RunConfig& config, const nlohmann::json& settings,
                       ConfigSources& sources, const std::string& source);
void apply_config_file(RunConfig& config, const std::filesystem::path& path,
                       ConfigSources& sources);

ConfigSources default_sources_map();

/// Every key in stable order. `include_runtime` adds `threads`, which never
/// changes results.
nlohmann::ordered_json config_to_json(const RunConfig& config, bool include_runtime = false);

/// Throws ConfigError naming the first invalid field.
void validate_config(const RunConfig& config);

/// Model names accepted for `model`, `chain` and `compare`.
const std::vector<std::string>& model_names();
bool model_uses_biclusters(std::string_view name);

/// The ratings file and the directory searched for canonical fold files.
/// `data` may name the file or its directory.
std::filesystem::path resolve_ratings_path(const RunConfig& config);

}  // namespace usbcf
