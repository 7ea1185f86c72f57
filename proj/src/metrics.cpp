#include "usbcf/metrics.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

#include "usbcf/special.hpp"

namespace usbcf {

Metrics compute_metrics(std::span<const PredictionRecord> records, std::size_t catalog_items) {
  if (records.empty()) throw ConfigError("compute_metrics needs at least one record");
  if (catalog_items == 0) throw ConfigError("item catalog must not be empty");
  Metrics m;
  m.total = records.size();
  double abs_sum = 0.0, sq_sum = 0.0;
  std::unordered_set<EntityId> items;
  for (const auto& r : records) {
    if (!r.predicted) continue;
    const double e = *r.predicted - r.truth;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ++m.predicted;
    items.insert(r.item);
  }
  if (m.predicted) {
    m.mae = abs_sum / m.predicted;
    m.rmse = std::sqrt(sq_sum / m.predicted);
  }
  m.prediction_coverage = 100.0 * m.predicted / m.total;
  m.item_coverage = 100.0 * items.size() / catalog_items;
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (values.size() - 1));
  }
  return out;
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ConfigError("paired t-test needs two equal-length samples of size >= 2");
  std::vector<double> d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
  const MeanStd s = mean_std(d);
  PairedTTest out;
  out.dof = static_cast<int>(d.size()) - 1;
  if (s.std == 0.0) {
    if (s.mean == 0.0) return out;
    out.t = s.mean > 0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
    return out;
  }
  out.t = s.mean / (s.std / std::sqrt(static_cast<double>(d.size())));
  out.p_value = student_t_two_sided(out.t, out.dof);
  return out;
}

}  // namespace usbcf
