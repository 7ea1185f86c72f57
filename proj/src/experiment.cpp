#include "usbcf/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "usbcf/bias.hpp"
#include "usbcf/cocluster.hpp"
#include "usbcf/hashing.hpp"
#include "usbcf/hybrid.hpp"
#include "usbcf/knn.hpp"
#include "usbcf/parallel.hpp"
#include "usbcf/usbcf_model.hpp"
#include "text_util.hpp"

namespace usbcf {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTestName = "paired Student t-test on per-fold MAE, two-sided";

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void record(const ExperimentOptions& o, int fold, const std::string& phase, const Stopwatch& w) {
  if (o.log) o.log->timings.push_back({fold, phase, w.seconds()});
}

void say(const ExperimentOptions& o, const std::string& line) {
  if (o.progress) *o.progress << line << std::endl;
}

RatingScale scale_of(const RunConfig& c) { return RatingScale{c.scale_min, c.scale_max}; }

std::vector<std::string> chain_of(const RunConfig& c) {
  std::vector<std::string> names{c.model};
  names.insert(names.end(), c.chain.begin(), c.chain.end());
  return names;
}

std::string join(const std::vector<std::string>& names, char sep) {
  std::string out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (k) out += sep;
    out += names[k];
  }
  return out;
}

std::string folds_key(const RunConfig& c) {
  std::ostringstream key;
  key << fs::absolute(resolve_ratings_path(c)).string() << '|' << c.split << '|' << c.folds << '|'
      << c.seed << '|' << c.scale_min << '|' << c.scale_max;
  return key.str();
}

std::vector<PredictionRecord> predict_all(const Predictor& model, const RatingDataset& test,
                                          int threads, std::vector<std::size_t>* answered_by) {
  std::vector<PredictionRecord> records(test.size());
  std::vector<std::size_t> member(test.size(), SIZE_MAX);
  const auto* hybrid = dynamic_cast<const HybridModel*>(&model);
  parallel_for(test.size(), threads, [&](std::size_t k) {
    const Rating& t = test.triples[k];
    records[k] = {t.user, t.item, t.value, std::nullopt};
    if (hybrid) {
      if (auto a = hybrid->answer(t.user, t.item)) {
        records[k].predicted = a->value;
        member[k] = a->member;
      }
    } else if (auto p = model.predict(t.user, t.item)) {
      records[k].predicted = *p;
      member[k] = 0;
    }
  });
  if (answered_by) {
    answered_by->assign(hybrid ? hybrid->chain().size() : 1, 0);
    for (std::size_t m : member)
      if (m != SIZE_MAX) ++(*answered_by)[m];
  }
  return records;
}

const UsbcfModel* first_bicluster_model(const Predictor& model) {
  if (auto* u = dynamic_cast<const UsbcfModel*>(&model)) return u;
  if (auto* h = dynamic_cast<const HybridModel*>(&model))
    for (const auto& m : h->chain())
      if (auto* u = dynamic_cast<const UsbcfModel*>(m.get())) return u;
  return nullptr;
}

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct SweepTarget {
  std::string name;
  std::vector<std::string> keys;
};

SweepTarget sweep_target(const std::string& parameter) {
  if (parameter == "minCols" || parameter == "min_cols") return {"minCols", {"min_cols"}};
  if (parameter == "minSim" || parameter == "min_sim") return {"minSim", {"min_sim"}};
  if (parameter == "nnbics") return {"nnbics", {"nnbics"}};
  if (parameter == "k") return {"k", {"k", "inner_k"}};
  if (parameter == "r") return {"r", {"r"}};
  if (parameter == "s") return {"s", {"s"}};
  throw ConfigError("unknown sweep parameter: " + parameter +
                    " (expected minCols, minSim, nnbics, k, r or s)");
}

const std::vector<std::string>& series_fields() {
  static const std::vector<std::string> f{"mae", "rmse", "prediction_coverage", "item_coverage",
                                          "biclusters", "personalized_users", "personalized_items"};
  return f;
}

}  // namespace

std::vector<double> fold_series(const EvalReport& report, std::string_view field) {
  std::vector<double> out;
  for (const auto& f : report.folds) {
    std::optional<double> v;
    if (field == "mae") v = f.metrics.mae;
    else if (field == "rmse") v = f.metrics.rmse;
    else if (field == "prediction_coverage") v = f.metrics.prediction_coverage;
    else if (field == "item_coverage") v = f.metrics.item_coverage;
    else if (field == "biclusters") {
      if (f.biclusters) v = static_cast<double>(*f.biclusters);
    } else if (field == "personalized_users") v = f.personalized_users;
    else if (field == "personalized_items") v = f.personalized_items;
    else if (field == "baseline_mae") v = f.baseline_mae;
    else throw ConfigError("unknown report field: " + std::string(field));
    if (v) out.push_back(*v);
  }
  return out;
}

ordered_json run_log_to_json(const RunLog& log, int threads) {
  ordered_json out;
  out["threads"] = threads;
  out["cache_hits"] = log.cache_hits;
  out["cache_misses"] = log.cache_misses;
  ordered_json phases = ordered_json::array();
  for (const auto& t : log.timings)
    phases.push_back({{"fold", t.fold}, {"phase", t.phase}, {"seconds", t.seconds}});
  out["timings"] = std::move(phases);
  return out;
}

std::shared_ptr<const std::vector<FoldSplit>> ExperimentCache::folds(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = folds_.find(key);
  return it == folds_.end() ? nullptr : it->second;
}

void ExperimentCache::put_folds(const std::string& key,
                                std::shared_ptr<const std::vector<FoldSplit>> folds) {
  std::lock_guard lock(mutex_);
  folds_[key] = std::move(folds);
}

std::shared_ptr<const BiclusterSet> ExperimentCache::biclusters(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = biclusters_.find(key);
  return it == biclusters_.end() ? nullptr : it->second;
}

void ExperimentCache::put_biclusters(const std::string& key, std::shared_ptr<const BiclusterSet> set) {
  std::lock_guard lock(mutex_);
  biclusters_[key] = std::move(set);
}

std::vector<FoldSplit> load_folds(const RunConfig& config) {
  const fs::path path = resolve_ratings_path(config);
  const RatingScale scale = scale_of(config);
  if (config.split == "canonical") {
    if (auto given = load_canonical_folds(path.parent_path(), config.folds, scale)) return *given;
    return block_folds(load_ratings(path, scale), config.folds);
  }
  return split_folds(load_ratings(path, scale), config.folds, config.seed);
}

std::string mining_key(const RunConfig& c, const RatingDataset& train) {
  std::ostringstream text;
  text << "usbcf-mine 1\nmin_cols";
  for (int v : c.min_cols) text << ' ' << v;
  text << "\nmin_rows " << c.min_rows << "\nmax_biclusters " << c.max_biclusters
       << "\nmax_branching " << c.max_branching << "\nalpha "
       << (c.alpha ? detail::format_double(*c.alpha) : std::string("none")) << '\n';
  write_dataset(text, train);
  return sha256_hex(text.str());
}

BiclusterSet mine_aggregate(const RunConfig& c, const RatingMatrix& matrix) {
  MineOptions options;
  options.max_output = c.max_biclusters;
  options.max_branching = c.max_branching;
  options.threads = c.threads;
  std::vector<BiclusterSet> solutions;
  for (int cols : c.min_cols) solutions.push_back(mine(matrix, {cols, c.min_rows}, options));
  BiclusterSet set = aggregate(std::move(solutions));
  if (c.alpha) set = significance_filter(set, matrix, *c.alpha);
  return set;
}

std::shared_ptr<const BiclusterSet> obtain_biclusters(const RunConfig& config,
                                                      const RatingDataset& train,
                                                      const RatingMatrix& matrix, int fold,
                                                      const ExperimentOptions& options) {
  if (config.biclusters) {
    std::string path = *config.biclusters;
    const auto at = path.find("{fold}");
    if (at != std::string::npos) path.replace(at, 6, std::to_string(fold));
    std::ifstream in(path);
    if (!in) throw IoError("cannot open bicluster file " + path);
    return std::make_shared<const BiclusterSet>(read_biclusters(in, matrix));
  }
  const std::string key = mining_key(config, train);
  if (options.cache)
    if (auto hit = options.cache->biclusters(key)) {
      if (options.log) ++options.log->cache_hits;
      return hit;
    }
  std::shared_ptr<const BiclusterSet> set;
  const fs::path file =
      config.cache_dir.empty() ? fs::path() : fs::path(config.cache_dir) / (key + ".bic");
  if (!file.empty() && fs::exists(file)) {
    std::ifstream in(file);
    auto loaded = read_biclusters(in, matrix);
    loaded.closed = true;  // only mined output is written to the cache
    set = std::make_shared<const BiclusterSet>(std::move(loaded));
    if (options.log) ++options.log->cache_hits;
  } else {
    set = std::make_shared<const BiclusterSet>(mine_aggregate(config, matrix));
    if (options.log) ++options.log->cache_misses;
    if (!file.empty()) {
      fs::create_directories(file.parent_path());
      const fs::path tmp = file.string() + ".tmp";
      {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write cache file " + tmp.string());
        write_biclusters(out, *set, matrix);
        if (!out) throw IoError("failed writing cache file " + tmp.string());
      }
      fs::rename(tmp, file);
    }
  }
  if (options.cache) options.cache->put_biclusters(key, set);
  return set;
}

std::shared_ptr<const Predictor> train_model(const std::string& name, const RunConfig& c,
                                             std::shared_ptr<const RatingMatrix> matrix,
                                             const BiclusterSet* biclusters) {
  const Centering centering = c.centering == "user" ? Centering::UserMeans : Centering::ItemMeans;
  if (name == "bias") return std::make_shared<BiasModel>(train_bias(matrix, c.lambda_item, c.lambda_user));
  if (name == "ubcf" || name == "ibcf") {
    KnnOptions o;
    o.mode = name == "ubcf" ? KnnMode::User : KnnMode::Item;
    o.k = c.k;
    o.centering = centering;
    o.threads = c.threads;
    return std::make_shared<KnnModel>(train_knn(matrix, o));
  }
  if (name == "cocluster") {
    CoclusterOptions o;
    o.row_clusters = c.r;
    o.col_clusters = c.s;
    o.max_iters = c.iters;
    o.seed = c.seed;
    return std::make_shared<CoclusterModel>(train_cocluster(matrix, o));
  }
  if (model_uses_biclusters(name)) {
    if (!biclusters) throw ConfigError(name + " needs a bicluster solution");
    UsbcfOptions o;
    o.min_sim = c.min_sim;
    o.nnbics = c.nnbics;
    o.inner_k = c.inner_k;
    o.centering = centering;
    o.threads = c.threads;
    if (name == "usbcf") return std::make_shared<UsbcfModel>(train_usbcf(matrix, *biclusters, o));
    return std::make_shared<UsbcfModel>(train_bbcf(matrix, *biclusters, c.nnbics, o));
  }
  throw ConfigError("unknown model: " + name);
}

std::shared_ptr<const Predictor> train_configured(const RunConfig& config,
                                                  std::shared_ptr<const RatingMatrix> matrix,
                                                  const BiclusterSet* biclusters) {
  std::vector<std::shared_ptr<const Predictor>> members;
  for (const auto& name : chain_of(config))
    members.push_back(train_model(name, config, matrix, biclusters));
  if (members.size() == 1) return members.front();
  return std::make_shared<HybridModel>(std::move(members));
}

EvalReport run_experiment(const RunConfig& config, const ExperimentOptions& options,
                          const ConfigSources& sources) {
  validate_config(config);
  EvalReport report;
  report.members = chain_of(config);
  report.model = join(report.members, '+');
  report.config = config_to_json(config);
  report.sources = sources;

  Stopwatch load_watch;
  std::shared_ptr<const std::vector<FoldSplit>> folds;
  const std::string fkey = folds_key(config);
  if (options.cache) folds = options.cache->folds(fkey);
  if (!folds) {
    folds = std::make_shared<const std::vector<FoldSplit>>(load_folds(config));
    if (options.cache) options.cache->put_folds(fkey, folds);
  }
  record(options, 0, "load", load_watch);

  bool needs_biclusters = false;
  for (const auto& m : report.members) needs_biclusters |= model_uses_biclusters(m);
  if (config.compare) needs_biclusters |= model_uses_biclusters(*config.compare);

  for (const FoldSplit& split : *folds) {
    const int fold = split.fold_id;
    FoldResult result;
    result.fold = fold;
    result.train_ratings = split.train.size();
    result.test_ratings = split.test.size();
    say(options, "fold " + std::to_string(fold) + ": " + report.model);

    auto matrix = std::make_shared<const RatingMatrix>(build_matrix(split.train));
    std::shared_ptr<const BiclusterSet> biclusters;
    if (needs_biclusters) {
      Stopwatch w;
      biclusters = obtain_biclusters(config, split.train, *matrix, fold, options);
      record(options, fold, "mine", w);
      result.biclusters = biclusters->size();
      result.biclusters_capped = biclusters->capped();
      say(options, "  biclusters: " + std::to_string(biclusters->size()) +
                       (biclusters->capped() ? " (capped)" : ""));
    }

    Stopwatch train_watch;
    auto model = train_configured(config, matrix, biclusters.get());
    record(options, fold, "train", train_watch);

    Stopwatch predict_watch;
    result.records = predict_all(*model, split.test, config.threads, &result.answered_by);
    record(options, fold, "predict", predict_watch);
    result.metrics = compute_metrics(result.records, static_cast<std::size_t>(matrix->n_items()));
    if (const UsbcfModel* u = first_bicluster_model(*model)) {
      result.personalized_users = u->mean_personalized_users();
      result.personalized_items = u->mean_personalized_items();
    }
    model.reset();

    if (config.compare) {
      Stopwatch w;
      auto baseline = train_model(*config.compare, config, matrix, biclusters.get());
      const auto records = predict_all(*baseline, split.test, config.threads, nullptr);
      result.baseline_mae =
          compute_metrics(records, static_cast<std::size_t>(matrix->n_items())).mae;
      record(options, fold, "compare", w);
    }
    if (!options.keep_records) std::vector<PredictionRecord>().swap(result.records);
    report.folds.push_back(std::move(result));
  }

  if (config.compare) {
    Comparison cmp;
    cmp.baseline = *config.compare;
    cmp.test = kTestName;
    std::vector<double> a;
    for (const auto& f : report.folds)
      if (f.metrics.mae && f.baseline_mae) {
        a.push_back(*f.metrics.mae);
        cmp.baseline_mae.push_back(*f.baseline_mae);
      }
    if (a.size() >= 2) cmp.result = paired_t_test(a, cmp.baseline_mae);
    report.comparison = std::move(cmp);
  }
  return report;
}

std::vector<EvalReport> sweep(const RunConfig& config, const std::string& parameter,
                              std::span<const std::string> values,
                              const ExperimentOptions& options, const ConfigSources& sources) {
  const SweepTarget target = sweep_target(parameter);
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  ExperimentCache local;
  ExperimentOptions shared = options;
  if (!shared.cache) shared.cache = &local;
  std::vector<EvalReport> reports;
  for (const auto& value : values) {
    RunConfig c = config;
    ConfigSources s = sources;
    for (const auto& key : target.keys) {
      set_config_value(c, key, value);
      s[key] = "sweep";
    }
    reports.push_back(run_experiment(c, shared, s));
  }
  return reports;
}

ordered_json report_to_json(const EvalReport& report) {
  ordered_json out;
  out["format"] = "usbcf-report 1";
  out["model"] = report.model;
  out["members"] = report.members;
  out["config"] = report.config;
  ordered_json sources = ordered_json::object();
  for (const auto& [key, source] : report.sources)
    if (report.config.contains(key)) sources[key] = source;
  out["config_sources"] = std::move(sources);

  ordered_json folds = ordered_json::array();
  for (const auto& f : report.folds) {
    ordered_json j;
    j["fold"] = f.fold;
    j["train_ratings"] = f.train_ratings;
    j["test_ratings"] = f.test_ratings;
    j["mae"] = opt(f.metrics.mae);
    j["rmse"] = opt(f.metrics.rmse);
    j["prediction_coverage"] = f.metrics.prediction_coverage;
    j["item_coverage"] = f.metrics.item_coverage;
    j["predicted"] = f.metrics.predicted;
    j["total"] = f.metrics.total;
    ordered_json by = ordered_json::object();
    for (std::size_t m = 0; m < f.answered_by.size() && m < report.members.size(); ++m)
      by[std::to_string(m) + ":" + report.members[m]] = f.answered_by[m];
    j["answered_by"] = std::move(by);
    j["biclusters"] = f.biclusters ? ordered_json(*f.biclusters) : ordered_json(nullptr);
    j["biclusters_capped"] = f.biclusters_capped;
    j["personalized_users"] = opt(f.personalized_users);
    j["personalized_items"] = opt(f.personalized_items);
    if (report.comparison) j["baseline_mae"] = opt(f.baseline_mae);
    folds.push_back(std::move(j));
  }
  out["folds"] = std::move(folds);

  ordered_json summary;
  summary["std"] = "sample standard deviation across folds";
  for (const auto& field : series_fields()) {
    const auto series = fold_series(report, field);
    if (series.empty()) {
      summary[field] = nullptr;
      continue;
    }
    const MeanStd ms = mean_std(series);
    summary[field] = {{"mean", ms.mean}, {"std", ms.std}, {"folds", series.size()}};
  }
  out["summary"] = std::move(summary);

  if (report.comparison) {
    const Comparison& c = *report.comparison;
    ordered_json j;
    j["baseline"] = c.baseline;
    j["test"] = c.test;
    j["baseline_mae"] = c.baseline_mae;
    if (c.result) {
      j["t"] = std::isfinite(c.result->t) ? ordered_json(c.result->t)
                                          : ordered_json(c.result->t > 0 ? "inf" : "-inf");
      j["p_value"] = c.result->p_value;
      j["dof"] = c.result->dof;
    } else {
      j["t"] = nullptr;
      j["p_value"] = nullptr;
      j["dof"] = nullptr;
    }
    out["comparison"] = std::move(j);
  }
  return out;
}

std::string report_table(std::span<const EvalReport> reports) {
  const std::vector<std::string> head{"Model", "MAE", "RMSE", "Coverage %", "Item Coverage %"};
  std::vector<std::vector<std::string>> rows;
  auto cell = [](const EvalReport& r, const char* field, int digits) {
    const auto s = fold_series(r, field);
    if (s.empty()) return std::string("-");
    const MeanStd ms = mean_std(s);
    return fmt(ms.mean, digits) + " +- " + fmt(ms.std, digits);
  };
  for (const auto& r : reports)
    rows.push_back({r.model, cell(r, "mae", 4), cell(r, "rmse", 4),
                    cell(r, "prediction_coverage", 2), cell(r, "item_coverage", 2)});
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      out << (c ? " | " : "") << v[c];
      if (c + 1 < v.size()) out << std::string(width[c] - v[c].size(), ' ');
    }
    out << '\n';
  };
  line(head);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& row : rows) line(row);
  return out.str();
}

std::string sweep_csv(const std::string& parameter, std::span<const std::string> values,
                      std::span<const EvalReport> reports) {
  if (values.size() != reports.size()) throw ConfigError("one report per sweep value expected");
  const std::string name = sweep_target(parameter).name;
  std::ostringstream out;
  out << "parameter,value,metric,fold,result\n";
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (const auto& field : series_fields()) {
      std::vector<double> series;
      for (const auto& f : reports[v].folds) {
        EvalReport one;
        one.folds.push_back(f);
        const auto s = fold_series(one, field);
        if (s.empty()) continue;
        series.push_back(s.front());
        out << name << ',' << values[v] << ',' << field << ',' << f.fold << ','
            << detail::format_double(s.front()) << '\n';
      }
      if (series.empty()) continue;
      const MeanStd ms = mean_std(series);
      out << name << ',' << values[v] << ',' << field << ",mean," << detail::format_double(ms.mean)
          << '\n';
      out << name << ',' << values[v] << ',' << field << ",std," << detail::format_double(ms.std)
          << '\n';
    }
  }
  return out.str();
}

void write_report_files(const EvalReport& report, const fs::path& dir, const RunLog* log,
                        int threads) {
  fs::create_directories(dir);
  auto write = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
  };
  write(dir / (report.model + ".json"), report_to_json(report).dump(2) + "\n");
  write(dir / (report.model + ".txt"), report_table(std::span(&report, 1)));
  if (log) write(dir / (report.model + ".timings.json"), run_log_to_json(*log, threads).dump(2) + "\n");
}

}  // namespace usbcf
