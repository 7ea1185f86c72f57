#include "usbcf/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

#include "text_util.hpp"

namespace usbcf {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(std::string_view key, std::string_view text, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key) +
                    " (expected " + std::string(want) + ")");
}

std::int64_t to_int(std::string_view key, std::string_view text) {
  const auto v = detail::parse_int(trim(text));
  if (!v) bad(key, text, "an integer");
  return *v;
}

double to_double(std::string_view key, std::string_view text) {
  const auto v = detail::parse_double(trim(text));
  if (!v) bad(key, text, "a number");
  return *v;
}

std::size_t to_size(std::string_view key, std::string_view text) {
  const auto v = to_int(key, text);
  if (v < 0) bad(key, text, "a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool is_none(std::string_view text) {
  const std::string t = trim(text);
  return t.empty() || t == "none";
}

std::vector<std::string> to_names(std::string_view text) {
  std::vector<std::string> out;
  if (is_none(text)) return out;
  for (auto part : detail::split(text, ',')) out.push_back(trim(part));
  return out;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<ordered_json(const RunConfig&)> get;
};

ordered_json opt_json(const std::optional<std::string>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    auto add = [&](std::string_view name, std::string_view doc, auto set, auto get) {
      t.push_back({{name, doc}, set, get});
    };
#define USBCF_INT(field, doc)                                                               \
  add(#field, doc,                                                                          \
      [](RunConfig& c, std::string_view v) { c.field = static_cast<int>(to_int(#field, v)); }, \
      [](const RunConfig& c) { return ordered_json(c.field); })
#define USBCF_SIZE(field, doc)                                                          \
  add(#field, doc, [](RunConfig& c, std::string_view v) { c.field = to_size(#field, v); }, \
      [](const RunConfig& c) { return ordered_json(c.field); })
#define USBCF_DOUBLE(field, doc)                                                          \
  add(#field, doc, [](RunConfig& c, std::string_view v) { c.field = to_double(#field, v); }, \
      [](const RunConfig& c) { return ordered_json(c.field); })
#define USBCF_STRING(field, doc)                                                       \
  add(#field, doc, [](RunConfig& c, std::string_view v) { c.field = trim(v); },         \
      [](const RunConfig& c) { return ordered_json(c.field); })
#define USBCF_OPT_STRING(field, doc)                                                     \
  add(#field, doc,                                                                       \
      [](RunConfig& c, std::string_view v) {                                             \
        if (is_none(v)) c.field.reset();                                                 \
        else c.field = trim(v);                                                          \
      },                                                                                 \
      [](const RunConfig& c) { return opt_json(c.field); })

    USBCF_STRING(data, "ratings file (user item rating timestamp) or its directory");
    USBCF_STRING(split, "canonical | random");
    USBCF_INT(folds, "number of cross-validation folds");
    add("seed", "seed for random splits and co-clustering starts",
        [](RunConfig& c, std::string_view v) {
          const auto s = to_int("seed", v);
          if (s < 0) bad("seed", v, "a non-negative integer");
          c.seed = static_cast<std::uint64_t>(s);
        },
        [](const RunConfig& c) { return ordered_json(c.seed); });
    USBCF_DOUBLE(scale_min, "lowest rating value");
    USBCF_DOUBLE(scale_max, "highest rating value");
    USBCF_STRING(model, "bias | ubcf | ibcf | cocluster | usbcf | bbcf");
    add("chain", "comma-separated fallback models tried after `model`",
        [](RunConfig& c, std::string_view v) { c.chain = to_names(v); },
        [](const RunConfig& c) { return ordered_json(c.chain); });
    USBCF_OPT_STRING(compare, "baseline model for a paired t-test on per-fold MAE");
    add("min_cols", "comma-separated minimum item counts; solutions are aggregated",
        [](RunConfig& c, std::string_view v) {
          c.min_cols.clear();
          for (auto part : detail::split(v, ','))
            c.min_cols.push_back(static_cast<int>(to_int("min_cols", part)));
        },
        [](const RunConfig& c) { return ordered_json(c.min_cols); });
    USBCF_INT(min_rows, "minimum users per bicluster");
    USBCF_DOUBLE(min_sim, "usbcf threshold on match * fit");
    USBCF_SIZE(nnbics, "bbcf neighborhood size");
    USBCF_INT(k, "neighbors for ubcf and ibcf");
    USBCF_INT(inner_k, "neighbors of the personalized item-based model");
    USBCF_INT(r, "co-clustering row clusters");
    USBCF_INT(s, "co-clustering column clusters");
    USBCF_INT(iters, "co-clustering iteration limit");
    USBCF_DOUBLE(lambda_item, "item bias damping");
    USBCF_DOUBLE(lambda_user, "user bias damping");
    add("alpha", "significance filter level in (0, 1], or none",
        [](RunConfig& c, std::string_view v) {
          if (is_none(v)) c.alpha.reset();
          else c.alpha = to_double("alpha", v);
        },
        [](const RunConfig& c) { return c.alpha ? ordered_json(*c.alpha) : ordered_json(nullptr); });
    USBCF_SIZE(max_biclusters, "per-minCols miner output cap (0 = unlimited)");
    USBCF_SIZE(max_branching, "miner extensions explored per node (0 = unlimited)");
    USBCF_STRING(centering, "item | user offsets inside item-based aggregation");
    USBCF_INT(threads, "worker threads; results do not depend on it");
    USBCF_STRING(cache_dir, "mined solution cache directory (empty = off)");
    USBCF_STRING(output_dir, "report directory");
    USBCF_OPT_STRING(biclusters, "solution file to import instead of mining ({fold} = fold number)");
#undef USBCF_INT
#undef USBCF_SIZE
#undef USBCF_DOUBLE
#undef USBCF_STRING
#undef USBCF_OPT_STRING
    return t;
  }();
  return table;
}

const Entry& entry(std::string_view key) {
  for (const auto& e : entries())
    if (e.key.name == key) return e;
  throw ConfigError("unknown config key: " + std::string(key));
}

std::string json_text(const json& v) {
  if (v.is_null()) return "none";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) out += ',';
      out += json_text(v[k]);
    }
    return out;
  }
  if (v.is_number_float()) return detail::format_double(v.get<double>());
  return v.dump();
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view text) {
  entry(key).set(config, text);
}

void apply_config_json(RunConfig& config, const json& settings, ConfigSources& sources,
                       const std::string& source) {
  if (!settings.is_object()) throw ConfigError("config must be a JSON object of settings");
  for (auto it = settings.begin(); it != settings.end(); ++it) {
    set_config_value(config, it.key(), json_text(it.value()));
    sources[it.key()] = source;
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path,
                       ConfigSources& sources) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json settings;
  try {
    settings = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  apply_config_json(config, settings, sources, "file");
}

ConfigSources default_sources_map() {
  ConfigSources s;
  for (const auto& e : entries()) s[std::string(e.key.name)] = "default";
  return s;
}

ordered_json config_to_json(const RunConfig& config, bool include_runtime) {
  ordered_json out = ordered_json::object();
  for (const auto& e : entries()) {
    if (!include_runtime && e.key.name == "threads") continue;
    out[std::string(e.key.name)] = e.get(config);
  }
  return out;
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"bias", "ubcf", "ibcf", "cocluster", "usbcf", "bbcf"};
  return names;
}

bool model_uses_biclusters(std::string_view name) { return name == "usbcf" || name == "bbcf"; }

void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  auto known = [](const std::string& name) {
    const auto& names = model_names();
    return std::find(names.begin(), names.end(), name) != names.end();
  };
  if (c.data.empty()) fail("data must name a ratings file");
  if (c.split != "canonical" && c.split != "random") fail("split must be canonical or random");
  if (c.folds < 2) fail("folds must be at least 2");
  if (!(c.scale_min < c.scale_max)) fail("scale_min must be below scale_max");
  if (!known(c.model)) fail("unknown model: " + c.model);
  for (const auto& m : c.chain)
    if (!known(m)) fail("unknown chain model: " + m);
  if (c.compare && !known(*c.compare)) fail("unknown compare model: " + *c.compare);
  if (c.min_cols.empty()) fail("min_cols needs at least one value");
  for (int v : c.min_cols)
    if (v < 1) fail("min_cols values must be at least 1");
  if (c.min_rows < 2) fail("min_rows must be at least 2");
  if (!(c.min_sim >= 0.0 && c.min_sim <= 1.0)) fail("min_sim must lie in [0, 1]");
  if (c.nnbics < 1) fail("nnbics must be at least 1");
  if (c.k < 1) fail("k must be at least 1");
  if (c.inner_k < 1) fail("inner_k must be at least 1");
  if (c.r < 1 || c.s < 1) fail("r and s must be at least 1");
  if (c.iters < 1) fail("iters must be at least 1");
  if (!(c.lambda_item >= 0.0) || !(c.lambda_user >= 0.0)) fail("lambdas must be non-negative");
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha <= 1.0)) fail("alpha must lie in (0, 1]");
  if (c.centering != "item" && c.centering != "user") fail("centering must be item or user");
  if (c.threads < 1) fail("threads must be at least 1");
}

std::filesystem::path resolve_ratings_path(const RunConfig& config) {
  namespace fs = std::filesystem;
  auto inside = [](const fs::path& p) { return fs::is_directory(p) ? p / "u.data" : p; };
  const fs::path given = config.data;
  if (fs::exists(given)) return inside(given);
  // Bare dataset names such as "ml-100k" resolve under data/.
  const fs::path under = fs::path("data") / given;
  if (given.is_relative() && fs::exists(under)) return inside(under);
  return given;
}

}  // namespace usbcf
