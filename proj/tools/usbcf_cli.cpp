#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "usbcf/config.hpp"
#include "usbcf/experiment.hpp"
#include "usbcf/fetch.hpp"
#include "usbcf/hybrid.hpp"
#include "usbcf/model_io.hpp"

namespace {

using namespace usbcf;

enum Exit { kOk = 0, kConfig = 2, kIo = 3, kInternal = 4 };

std::string dashed(std::string_view key) {
  std::string out(key);
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

/// Config flags registered on one subcommand.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    app.add_option("--config", file, "JSON settings file (flags override it)");
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      options[name] = app.add_option("--" + dashed(name), values[name], std::string(key.doc));
    }
  }

  RunConfig resolve(ConfigSources& sources) const {
    RunConfig config;
    sources = default_sources_map();
    if (!file.empty()) apply_config_file(config, file, sources);
    for (const auto& [name, option] : options)
      if (option->count() > 0) {
        set_config_value(config, name, values.at(name));
        sources[name] = "flag";
      }
    validate_config(config);
    return config;
  }
};

RatingDataset training_data(const RunConfig& config, int fold) {
  if (fold == 0) return load_ratings(resolve_ratings_path(config), {config.scale_min, config.scale_max});
  const auto folds = load_folds(config);
  if (fold < 0 || fold > static_cast<int>(folds.size()))
    throw ConfigError("fold must be 0 (all ratings) or 1.." + std::to_string(folds.size()));
  return folds[fold - 1].train;
}

void print_sources(const ConfigSources& sources) {
  std::cerr << "settings:";
  for (const auto& [key, source] : sources)
    if (source != "default") std::cerr << ' ' << key << '=' << source;
  std::cerr << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"User-specific bicluster-based collaborative filtering"};
  app.require_subcommand(1);

  auto* fetch = app.add_subcommand("fetch-data", "download and checksum MovieLens-100k");
  FetchOptions fetch_opts;
  std::string fetch_dir = fetch_opts.out_dir.string(), fetch_archive;
  bool no_verify = false;
  fetch->add_option("--out-dir", fetch_dir, "target directory for u.data");
  fetch->add_option("--archive", fetch_archive, "local archive instead of downloading");
  fetch->add_flag("--no-verify", no_verify, "skip the checksum");
  fetch->add_flag("--force", fetch_opts.force, "replace an existing file");

  auto* mine_cmd = app.add_subcommand("mine", "mine and aggregate bicluster solutions");
  ConfigFlags mine_flags;
  mine_flags.attach(*mine_cmd);
  int mine_fold = 0;
  std::string mine_out;
  mine_cmd->add_option("--fold", mine_fold, "training part of this fold (0 = all ratings)");
  mine_cmd->add_option("--out", mine_out, "solution file")->required();

  auto* train_cmd = app.add_subcommand("train", "train the configured model and save it");
  ConfigFlags train_flags;
  train_flags.attach(*train_cmd);
  int train_fold = 0;
  std::string train_out;
  train_cmd->add_option("--fold", train_fold, "training part of this fold (0 = all ratings)");
  train_cmd->add_option("--out", train_out, "model file")->required();

  auto* eval_cmd = app.add_subcommand("evaluate", "cross-validate and write reports");
  ConfigFlags eval_flags;
  eval_flags.attach(*eval_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate over a parameter grid");
  ConfigFlags sweep_flags;
  sweep_flags.attach(*sweep_cmd);
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "minCols | minSim | nnbics | k | r | s")->required();
  sweep_cmd->add_option("--values", sweep_values, "grid values")->required()->delimiter(',');

  auto* predict_cmd = app.add_subcommand("predict", "score one user/item pair");
  std::string model_file;
  EntityId user = 0, item = 0;
  predict_cmd->add_option("--model-file", model_file, "file written by `train`")->required();
  predict_cmd->add_option("--user", user, "user id")->required();
  predict_cmd->add_option("--item", item, "item id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (fetch->parsed()) {
    fetch_opts.out_dir = fetch_dir;
    if (!fetch_archive.empty()) fetch_opts.archive = fetch_archive;
    fetch_opts.verify = !no_verify;
    const FetchResult r = fetch_movielens_100k(fetch_opts);
    std::cout << r.path.string() << ' ' << r.sha256 << ' '
              << (r.already_present ? "present" : r.source) << '\n';
    return kOk;
  }

  if (mine_cmd->parsed()) {
    ConfigSources sources;
    const RunConfig config = mine_flags.resolve(sources);
    print_sources(sources);
    const RatingDataset train = training_data(config, mine_fold);
    const RatingMatrix matrix = build_matrix(train);
    RunLog log;
    ExperimentOptions options;
    options.log = &log;
    RunConfig own = config;
    own.biclusters.reset();
    const auto start = std::chrono::steady_clock::now();
    const auto set = obtain_biclusters(own, train, matrix, mine_fold, options);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream out(mine_out);
    if (!out) throw IoError("cannot write " + mine_out);
    write_biclusters(out, *set, matrix);
    if (!out) throw IoError("failed writing " + mine_out);
    std::cout << "biclusters " << set->size() << (set->capped() ? " capped" : "") << '\n';
    std::cerr << "cache " << (log.cache_hits ? "hit" : "miss") << ", " << seconds << " s\n";
    return kOk;
  }

  if (train_cmd->parsed()) {
    ConfigSources sources;
    const RunConfig config = train_flags.resolve(sources);
    print_sources(sources);
    const RatingDataset train = training_data(config, train_fold);
    auto matrix = std::make_shared<const RatingMatrix>(build_matrix(train));
    std::shared_ptr<const BiclusterSet> set;
    bool needs = model_uses_biclusters(config.model);
    for (const auto& m : config.chain) needs |= model_uses_biclusters(m);
    if (needs) set = obtain_biclusters(config, train, *matrix, train_fold, ExperimentOptions{});
    const auto model = train_configured(config, matrix, set.get());
    save_model(std::filesystem::path(train_out), *model);
    std::cout << model->name() << ' ' << train_out << '\n';
    return kOk;
  }

  if (eval_cmd->parsed()) {
    ConfigSources sources;
    const RunConfig config = eval_flags.resolve(sources);
    print_sources(sources);
    RunLog log;
    ExperimentCache cache;
    ExperimentOptions options;
    options.cache = &cache;
    options.log = &log;
    options.progress = &std::cerr;
    const EvalReport report = run_experiment(config, options, sources);
    write_report_files(report, config.output_dir, &log, config.threads);
    std::cout << report_table(std::span(&report, 1));
    if (report.comparison && report.comparison->result)
      std::cout << report.comparison->test << " vs " << report.comparison->baseline
                << ": t = " << report.comparison->result->t
                << ", p = " << report.comparison->result->p_value << '\n';
    return kOk;
  }

  if (sweep_cmd->parsed()) {
    ConfigSources sources;
    const RunConfig config = sweep_flags.resolve(sources);
    print_sources(sources);
    RunLog log;
    ExperimentCache cache;
    ExperimentOptions options;
    options.cache = &cache;
    options.log = &log;
    options.progress = &std::cerr;
    const auto reports = sweep(config, sweep_param, sweep_values, options, sources);
    std::filesystem::create_directories(config.output_dir);
    const std::string stem = config.output_dir + "/" + reports.front().model + "-sweep-" + sweep_param;
    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    for (const auto& r : reports) all.push_back(report_to_json(r));
    {
      std::ofstream out(stem + ".json");
      out << all.dump(2) << '\n';
      std::ofstream csv(stem + ".csv");
      csv << sweep_csv(sweep_param, sweep_values, reports);
      std::ofstream timings(stem + ".timings.json");
      timings << run_log_to_json(log, config.threads).dump(2) << '\n';
      if (!out || !csv || !timings) throw IoError("failed writing sweep output " + stem);
    }
    for (std::size_t v = 0; v < reports.size(); ++v) {
      const auto cov = fold_series(reports[v], "prediction_coverage");
      const auto mae = fold_series(reports[v], "mae");
      std::cout << sweep_param << '=' << sweep_values[v] << "  MAE "
                << (mae.empty() ? std::string("-") : std::to_string(mean_std(mae).mean))
                << "  coverage " << mean_std(cov).mean << "%\n";
    }
    return kOk;
  }

  if (predict_cmd->parsed()) {
    const auto model = load_model(std::filesystem::path(model_file));
    std::optional<double> value;
    std::string source;
    if (auto* h = dynamic_cast<const HybridModel*>(model.get())) {
      if (auto a = h->answer(user, item)) {
        value = a->value;
        source = h->chain()[a->member]->name();
      }
    } else if ((value = model->predict(user, item))) {
      source = model->name();
    }
    if (value) std::printf("%.6f %s\n", *value, source.c_str());
    else std::printf("no-prediction\n");
    return kOk;
  }
  return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const usbcf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const usbcf::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
