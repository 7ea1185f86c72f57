#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "usbcf/config.hpp"
#include "usbcf/experiment.hpp"
#include "usbcf/metrics.hpp"

using namespace usbcf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("usbcf-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Small ratings file with two taste groups so constant biclusters exist.
fs::path write_toy_ratings(const fs::path& dir) {
  std::mt19937_64 rng(101);
  std::bernoulli_distribution keep(0.55), noisy(0.25);
  std::uniform_int_distribution<int> any(1, 5);
  std::ofstream out(dir / "u.data");
  for (int u = 1; u <= 60; ++u)
    for (int i = 1; i <= 40; ++i) {
      if (!keep(rng)) continue;
      const int taste = (u % 2 == 0) == (i % 3 == 0) ? 5 - i % 2 : 1 + i % 2;
      out << u << '\t' << i << '\t' << (noisy(rng) ? any(rng) : taste) << '\t' << 880000000 + u * i
          << '\n';
    }
  return dir / "u.data";
}

RunConfig toy_config(const fs::path& dir) {
  RunConfig c;
  c.data = write_toy_ratings(dir).string();
  c.split = "random";
  c.min_cols = {2, 3, 5};
  c.cache_dir.clear();
  c.output_dir = (dir / "out").string();
  c.k = c.inner_k = 10;
  return c;
}

}  // namespace

TEST_CASE("exact predictions give zero error") {
  std::vector<PredictionRecord> r{{1, 1, 4, 4.0}, {1, 2, 2, 2.0}};
  const auto m = compute_metrics(r, 2);
  CHECK(*m.mae == 0.0);
  CHECK(*m.rmse == 0.0);
  CHECK(m.prediction_coverage == 100.0);
}

TEST_CASE("MAE and RMSE identities") {
  std::vector<PredictionRecord> equal{{1, 1, 3, 4.0}, {1, 2, 3, 2.0}};
  CHECK(*compute_metrics(equal, 2).mae == 1.0);
  CHECK(*compute_metrics(equal, 2).rmse == 1.0);
  std::vector<PredictionRecord> unequal{{1, 1, 3, 3.0}, {1, 2, 3, 5.0}};
  CHECK(*compute_metrics(unequal, 2).mae == 1.0);
  CHECK(*compute_metrics(unequal, 2).rmse == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("coverage counting example") {
  std::vector<PredictionRecord> r;
  const EntityId items[10] = {1, 2, 3, 4, 1, 2, 5, 6, 7, 8};
  for (int k = 0; k < 10; ++k)
    r.push_back({k, items[k], 3, k < 7 && items[k] <= 4 ? std::optional<double>(3.0) : std::nullopt});
  // Records 0-5 answer items 1..4; add one more answered record on item 1.
  r[6] = {6, 1, 3, 3.0};
  const auto m = compute_metrics(r, 8);
  CHECK(m.total == 10);
  CHECK(m.predicted == 7);
  CHECK(m.prediction_coverage == doctest::Approx(70.0));
  CHECK(m.item_coverage == doctest::Approx(50.0));
}

TEST_CASE("nothing predicted") {
  std::vector<PredictionRecord> r{{1, 1, 3, std::nullopt}};
  const auto m = compute_metrics(r, 5);
  CHECK_FALSE(m.mae.has_value());
  CHECK_FALSE(m.rmse.has_value());
  CHECK(m.prediction_coverage == 0.0);
  CHECK(m.item_coverage == 0.0);
  CHECK_THROWS_AS(compute_metrics(std::vector<PredictionRecord>{}, 5), ConfigError);
  CHECK_THROWS_AS(compute_metrics(r, 0), ConfigError);
}

TEST_CASE("metrics match the counting oracle on random record sets") {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> size(1, 200), item(1, 50), rating(1, 5);
  std::uniform_real_distribution<double> pred(1.0, 5.0);
  std::bernoulli_distribution answered(0.7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PredictionRecord> r(static_cast<std::size_t>(size(rng)));
    for (auto& x : r) {
      x = {item(rng), item(rng), double(rating(rng)), std::nullopt};
      if (answered(rng)) x.predicted = pred(rng);
    }
    const auto c = oracle::count_metrics(r);
    const auto m = compute_metrics(r, 50);
    CHECK(m.total == c.total);
    CHECK(m.predicted == c.predicted);
    CHECK(m.prediction_coverage == doctest::Approx(100.0 * c.predicted / c.total));
    CHECK(m.item_coverage == doctest::Approx(100.0 * c.items.size() / 50));
    if (c.predicted) {
      CHECK(*m.mae == doctest::Approx(c.abs_sum / c.predicted));
      CHECK(*m.rmse == doctest::Approx(std::sqrt(c.sq_sum / c.predicted)));
      CHECK(*m.mae <= *m.rmse + 1e-12);
    }
  }
}

TEST_CASE("mean and sample deviation") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto ms = mean_std(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_std(std::vector<double>{7}).std == 0.0);
}

TEST_CASE("paired t-test reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{0.5, 1.9, 2.1, 3.6, 4.2};
  const auto t = paired_t_test(a, b);
  CHECK(t.t == doctest::Approx(3.762358277174736));
  CHECK(t.p_value == doctest::Approx(0.019734537799959286).epsilon(1e-9));
  CHECK(t.dof == 4);
  const std::vector<double> c{0.74, 0.75, 0.73, 0.76, 0.745}, d{0.75, 0.752, 0.741, 0.77, 0.751};
  const auto u = paired_t_test(c, d);
  CHECK(u.t == doctest::Approx(-4.628448466956027));
  CHECK(u.p_value == doctest::Approx(0.00981863399625875).epsilon(1e-9));
  const auto same = paired_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ConfigError);
}

TEST_CASE("config defaults, layering and validation") {
  RunConfig c;
  CHECK(c.min_cols == std::vector<int>{3, 5, 7, 10, 15, 20});
  CHECK(c.min_sim == 0.25);
  CHECK(c.k == 20);
  CHECK(c.nnbics == 50);
  CHECK_NOTHROW(validate_config(c));
  const fs::path dir = scratch_dir("config");
  {
    std::ofstream f(dir / "run.json");
    f << R"({"min_sim": 0.4, "chain": ["ibcf"], "min_cols": [3, 5], "alpha": 0.01, "k": "15"})";
  }
  auto sources = default_sources_map();
  apply_config_file(c, dir / "run.json", sources);
  set_config_value(c, "min_sim", "0.5");
  sources["min_sim"] = "flag";
  CHECK(c.min_sim == 0.5);
  CHECK(c.chain == std::vector<std::string>{"ibcf"});
  CHECK(c.min_cols == std::vector<int>{3, 5});
  CHECK(*c.alpha == 0.01);
  CHECK(c.k == 15);
  CHECK(sources["chain"] == "file");
  CHECK(sources["min_sim"] == "flag");
  CHECK(sources["nnbics"] == "default");
  CHECK_THROWS_AS(set_config_value(c, "bogus", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "k", "many"), ConfigError);
  RunConfig bad;
  bad.model = "svd";
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = RunConfig{};
  bad.min_sim = 1.5;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  const auto echo = config_to_json(c);
  CHECK_FALSE(echo.contains("threads"));
  CHECK(config_to_json(c, true).contains("threads"));
  RunConfig again;
  auto s2 = default_sources_map();
  apply_config_json(again, nlohmann::json::parse(echo.dump()), s2, "file");
  CHECK(config_to_json(again).dump() == echo.dump());
  CHECK(config_keys().size() == config_to_json(c, true).size());
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  const fs::path dir = scratch_dir("determinism");
  RunConfig c = toy_config(dir);
  c.model = "usbcf";
  c.chain = {"ibcf", "cocluster"};
  c.compare = "ibcf";
  c.min_sim = 0.2;
  const auto a = report_to_json(run_experiment(c)).dump();
  const auto b = report_to_json(run_experiment(c)).dump();
  c.threads = 8;
  auto sources = default_sources_map();
  sources["threads"] = "flag";
  const auto d = report_to_json(run_experiment(c, {}, sources)).dump();
  CHECK(a == b);
  CHECK(a == d);
  const auto j = nlohmann::json::parse(a);
  CHECK(j["folds"].size() == 5);
  CHECK(j["comparison"]["test"].get<std::string>().find("t-test") != std::string::npos);
  for (const auto& f : j["folds"]) {
    CHECK(f["mae"].get<double>() <= f["rmse"].get<double>());
    CHECK(f["prediction_coverage"].get<double>() == doctest::Approx(100.0));
  }
}

TEST_CASE("echoed config reproduces the report") {
  const fs::path dir = scratch_dir("echo");
  RunConfig c = toy_config(dir);
  c.model = "bbcf";
  c.nnbics = 7;
  const auto first = run_experiment(c);
  RunConfig again;
  auto sources = default_sources_map();
  apply_config_json(again, nlohmann::json::parse(first.config.dump()), sources, "file");
  const auto second = run_experiment(again, {}, first.sources);
  CHECK(report_to_json(first).dump() == report_to_json(second).dump());
}

TEST_CASE("hybrid coverage is at least its first member's") {
  const fs::path dir = scratch_dir("hybrid");
  RunConfig c = toy_config(dir);
  ExperimentCache cache;
  ExperimentOptions o;
  o.cache = &cache;
  const auto solo = run_experiment(c, o);
  c.chain = {"ibcf"};
  const auto hybrid = run_experiment(c, o);
  for (std::size_t f = 0; f < solo.folds.size(); ++f) {
    CHECK(hybrid.folds[f].metrics.predicted >= solo.folds[f].metrics.predicted);
    CHECK(hybrid.folds[f].answered_by[0] == solo.folds[f].metrics.predicted);
  }
}

TEST_CASE("minSim sweep reuses the mined solution and shrinks coverage") {
  const fs::path dir = scratch_dir("sweep");
  RunConfig c = toy_config(dir);
  RunLog log;
  ExperimentOptions o;
  o.log = &log;
  const std::vector<std::string> values{"0.1", "0.2", "0.3", "0.4", "0.5"};
  const auto reports = sweep(c, "minSim", values, o);
  REQUIRE(reports.size() == values.size());
  CHECK(log.cache_misses == 5);  // one mining per fold
  CHECK(log.cache_hits == 20);
  for (std::size_t v = 1; v < reports.size(); ++v)
    for (std::size_t f = 0; f < reports[v].folds.size(); ++f) {
      CHECK(reports[v].folds[f].metrics.predicted <= reports[v - 1].folds[f].metrics.predicted);
      CHECK(*reports[v].folds[f].personalized_items <= *reports[v - 1].folds[f].personalized_items);
    }
  const auto csv = sweep_csv("minSim", values, reports);
  CHECK(csv.rfind("parameter,value,metric,fold,result\n", 0) == 0);
  CHECK(csv.find("minSim,0.3,prediction_coverage,mean,") != std::string::npos);
  CHECK_THROWS_AS(sweep(c, "gamma", values, o), ConfigError);
}

TEST_CASE("mined solutions persist in the disk cache") {
  const fs::path dir = scratch_dir("cache");
  RunConfig c = toy_config(dir);
  c.cache_dir = (dir / "cache").string();
  RunLog first, second;
  ExperimentOptions o;
  o.log = &first;
  const auto a = run_experiment(c, o);
  o.log = &second;
  const auto b = run_experiment(c, o);
  CHECK(first.cache_misses == 5);
  CHECK(second.cache_hits == 5);
  CHECK(second.cache_misses == 0);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("imported solutions feed the pipeline") {
  const fs::path dir = scratch_dir("import");
  RunConfig c = toy_config(dir);
  const auto folds = load_folds(c);
  for (const auto& f : folds) {
    const auto m = build_matrix(f.train);
    std::ofstream out(dir / ("fold" + std::to_string(f.fold_id) + ".bic"));
    write_biclusters(out, mine_aggregate(c, m), m);
  }
  const auto mined = run_experiment(c);
  c.biclusters = (dir / "fold{fold}.bic").string();
  const auto imported = run_experiment(c);
  for (std::size_t f = 0; f < mined.folds.size(); ++f) {
    CHECK(mined.folds[f].metrics.mae == imported.folds[f].metrics.mae);
    CHECK(mined.folds[f].biclusters == imported.folds[f].biclusters);
  }
}

TEST_CASE("report files and table") {
  const fs::path dir = scratch_dir("files");
  RunConfig c = toy_config(dir);
  c.model = "bias";
  RunLog log;
  ExperimentOptions o;
  o.log = &log;
  const auto r = run_experiment(c, o);
  write_report_files(r, c.output_dir, &log, 1);
  CHECK(fs::exists(fs::path(c.output_dir) / "bias.json"));
  CHECK(fs::exists(fs::path(c.output_dir) / "bias.timings.json"));
  const auto table = report_table(std::span(&r, 1));
  CHECK(table.rfind("Model | MAE", 0) == 0);
  CHECK(table.find("Item Coverage %") != std::string::npos);
  CHECK(table.find("bias") != std::string::npos);
}
