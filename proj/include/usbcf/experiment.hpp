#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "usbcf/config.hpp"
#include "usbcf/data.hpp"
#include "usbcf/metrics.hpp"
#include "usbcf/miner.hpp"
#include "usbcf/predictor.hpp"

namespace usbcf {

struct FoldResult {
  int fold = 0;
  std::size_t train_ratings = 0;
  std::size_t test_ratings = 0;
  Metrics metrics;
  /// Answers per chain member, in chain order.
  std::vector<std::size_t> answered_by;
  std::optional<std::size_t> biclusters;
  bool biclusters_capped = false;
  /// Mean personalized-matrix rows / columns of the first bicluster model.
  std::optional<double> personalized_users;
  std::optional<double> personalized_items;
  std::optional<double> baseline_mae;
  /// Test predictions in test-set order. Only kept on request; never written.
  std::vector<PredictionRecord> records;
};

struct Comparison {
  std::string baseline;
  std::string test;
  std::vector<double> baseline_mae;
  std::optional<PairedTTest> result;  // absent with fewer than 2 usable folds
};

struct EvalReport {
  std::string model;                 // chain members joined by '+'
  std::vector<std::string> members;
  nlohmann::ordered_json config;     // echo without runtime-only settings
  ConfigSources sources;
  std::vector<FoldResult> folds;
  std::optional<Comparison> comparison;
};

/// Per-fold values of one report field, skipping folds where it is absent.
std::vector<double> fold_series(const EvalReport& report, std::string_view field);

struct PhaseTiming {
  int fold = 0;
  std::string phase;
  double seconds = 0.0;
};

/// Run facts that vary between identical runs; kept out of reports.
struct RunLog {
  std::vector<PhaseTiming> timings;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

nlohmann::ordered_json run_log_to_json(const RunLog& log, int threads);

/// In-memory store shared by the runs of a sweep: fold splits and mined
/// solutions, keyed by content.
class ExperimentCache {
 public:
  std::shared_ptr<const std::vector<FoldSplit>> folds(const std::string& key) const;
  void put_folds(const std::string& key, std::shared_ptr<const std::vector<FoldSplit>> folds);
  std::shared_ptr<const BiclusterSet> biclusters(const std::string& key) const;
  void put_biclusters(const std::string& key, std::shared_ptr<const BiclusterSet> set);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const std::vector<FoldSplit>>> folds_;
  std::map<std::string, std::shared_ptr<const BiclusterSet>> biclusters_;
};

struct ExperimentOptions {
  ExperimentCache* cache = nullptr;
  RunLog* log = nullptr;
  std::ostream* progress = nullptr;
  bool keep_records = false;
};

/// Cross-validation folds named by the config.
std::vector<FoldSplit> load_folds(const RunConfig& config);

/// Digest of the training ratings and every setting that shapes a mined
/// solution (threads excluded).
std::string mining_key(const RunConfig& config, const RatingDataset& train);

/// Mines each minCols setting, aggregates, and applies the significance
/// filter when alpha is set.
BiclusterSet mine_aggregate(const RunConfig& config, const RatingMatrix& matrix);

/// Mined or imported solution for one fold (1-based; 0 = full dataset),
/// through the in-memory and on-disk caches.
std::shared_ptr<const BiclusterSet> obtain_biclusters(const RunConfig& config,
                                                      const RatingDataset& train,
                                                      const RatingMatrix& matrix, int fold,
                                                      const ExperimentOptions& options);

/// Trains one named model. `biclusters` is required by usbcf and bbcf.
std::shared_ptr<const Predictor> train_model(const std::string& name, const RunConfig& config,
                                             std::shared_ptr<const RatingMatrix> matrix,
                                             const BiclusterSet* biclusters);

/// The configured model with its fallback chain (a single model when the
/// chain is empty).
std::shared_ptr<const Predictor> train_configured(const RunConfig& config,
                                                  std::shared_ptr<const RatingMatrix> matrix,
                                                  const BiclusterSet* biclusters);

EvalReport run_experiment(const RunConfig& config, const ExperimentOptions& options = {},
                          const ConfigSources& sources = default_sources_map());

/// Accepted names: minCols, minSim, nnbics, k (neighbors of every KNN
/// model), r, s.
std::vector<EvalReport> sweep(const RunConfig& config, const std::string& parameter,
                              std::span<const std::string> values,
                              const ExperimentOptions& options = {},
                              const ConfigSources& sources = default_sources_map());

nlohmann::ordered_json report_to_json(const EvalReport& report);
/// Model, MAE, RMSE, Coverage %, Item Coverage % with mean +- std.
std::string report_table(std::span<const EvalReport> reports);
/// Columns: parameter, value, metric, fold, result. `fold` is the 1-based
/// fold number, "mean" or "std".
std::string sweep_csv(const std::string& parameter, std::span<const std::string> values,
                      std::span<const EvalReport> reports);

/// Output file stem: the model name with '+' kept.
void write_report_files(const EvalReport& report, const std::filesystem::path& dir,
                        const RunLog* log, int threads);

}  // namespace usbcf
