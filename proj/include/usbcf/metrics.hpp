#pragma once

#include <optional>
#include <span>
#include <vector>

#include "usbcf/common.hpp"

namespace usbcf {

struct PredictionRecord {
  EntityId user;
  EntityId item;
  double truth;
  std::optional<double> predicted;  // nullopt = no prediction
};

struct Metrics {
  std::optional<double> mae;   // absent when nothing was predicted
  std::optional<double> rmse;
  double prediction_coverage = 0.0;  // percent of records answered
  double item_coverage = 0.0;        // percent of catalog items with an answer
  std::size_t total = 0;
  std::size_t predicted = 0;
};

/// MAE and RMSE over answered records only. `catalog_items` is the denominator
/// of item coverage and must be positive.
Metrics compute_metrics(std::span<const PredictionRecord> records, std::size_t catalog_items);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct PairedTTest {
  double t = 0.0;
  double p_value = 1.0;  // two-sided
  int dof = 0;
};

/// Paired Student t-test on per-fold values (a - b). Requires equal lengths
/// of at least 2. Identical vectors give t = 0, p = 1.
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace usbcf
