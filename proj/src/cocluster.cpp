#include "usbcf/cocluster.hpp"

#include <algorithm>
#include <limits>

#include "usbcf/random.hpp"

namespace usbcf {

double CoclusterModel::reconstruct(Index user, Index item) const {
  const Index g = row_assign[user], h = col_assign[item];
  return cocluster_avg(g, h) + (matrix->user_means()[user] - row_avg[g]) +
         (matrix->item_means()[item] - col_avg[h]);
}

double CoclusterModel::predict_value(EntityId user, EntityId item) const {
  const auto u = matrix->find_user(user);
  const auto i = matrix->find_item(item);
  double r;
  if (u && i) r = reconstruct(*u, *i);
  else if (u) r = matrix->user_means()[*u];
  else if (i) r = matrix->item_means()[*i];
  else r = matrix->global_mean();
  return matrix->scale().clamp(r);
}

std::optional<double> CoclusterModel::predict(EntityId user, EntityId item) const {
  return predict_value(user, item);
}

void update_summaries(CoclusterModel& model) {
  const RatingMatrix& m = *model.matrix;
  const Index r = static_cast<Index>(model.row_avg.size());
  const Index s = static_cast<Index>(model.col_avg.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(r, s);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(r, s);
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto items = m.row_items(u);
    const auto values = m.row_values(u);
    const Index g = model.row_assign[u];
    for (std::size_t k = 0; k < items.size(); ++k) {
      const Index h = model.col_assign[items[k]];
      sum(g, h) += values[k];
      count(g, h) += 1.0;
    }
  }
  const double mu = m.global_mean();
  const Eigen::VectorXd row_sum = sum.rowwise().sum(), row_count = count.rowwise().sum();
  const Eigen::VectorXd col_sum = sum.colwise().sum().transpose();
  const Eigen::VectorXd col_count = count.colwise().sum().transpose();
  for (Index g = 0; g < r; ++g) model.row_avg[g] = row_count[g] > 0 ? row_sum[g] / row_count[g] : mu;
  for (Index h = 0; h < s; ++h) model.col_avg[h] = col_count[h] > 0 ? col_sum[h] / col_count[h] : mu;
  for (Index g = 0; g < r; ++g)
    for (Index h = 0; h < s; ++h)
      model.cocluster_avg(g, h) = count(g, h) > 0
                                      ? sum(g, h) / count(g, h)
                                      : model.row_avg[g] + model.col_avg[h] - mu;
}

double training_error(const CoclusterModel& model) {
  const RatingMatrix& m = *model.matrix;
  double total = 0.0;
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto items = m.row_items(u);
    const auto values = m.row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k) {
      const double e = values[k] - model.reconstruct(u, items[k]);
      total += e * e;
    }
  }
  return total;
}

namespace {

// Per-entity squared error under each candidate cluster. `rows` selects
// users against row clusters; otherwise items against column clusters.
Eigen::VectorXd candidate_costs(const CoclusterModel& model, Index entity, bool rows) {
  const RatingMatrix& m = *model.matrix;
  const Index n_clusters = static_cast<Index>(rows ? model.row_avg.size() : model.col_avg.size());
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_clusters);
  const auto others = rows ? m.row_items(entity) : m.col_users(entity);
  const auto values = rows ? m.row_values(entity) : m.col_values(entity);
  for (std::size_t k = 0; k < others.size(); ++k) {
    const Index o = others[k];
    for (Index c = 0; c < n_clusters; ++c) {
      const Index g = rows ? c : model.row_assign[o];
      const Index h = rows ? model.col_assign[o] : c;
      const Index u = rows ? entity : o;
      const Index i = rows ? o : entity;
      const double pred = model.cocluster_avg(g, h) + (m.user_means()[u] - model.row_avg[g]) +
                          (m.item_means()[i] - model.col_avg[h]);
      const double e = values[k] - pred;
      cost[c] += e * e;
    }
  }
  return cost;
}

bool reassign(CoclusterModel& model, bool rows) {
  std::vector<Index>& assign = rows ? model.row_assign : model.col_assign;
  const Index n_clusters = static_cast<Index>(rows ? model.row_avg.size() : model.col_avg.size());
  bool changed = false;
  std::vector<double> own_cost(assign.size(), 0.0);
  for (Index e = 0; e < static_cast<Index>(assign.size()); ++e) {
    const Eigen::VectorXd cost = candidate_costs(model, e, rows);
    Index best = assign[e];
    for (Index c = 0; c < n_clusters; ++c)
      if (cost[c] < cost[best]) best = c;
    if (best != assign[e]) changed = true;
    assign[e] = best;
    own_cost[e] = cost[best];
  }
  // Re-seed empty clusters with the worst-fitting entity of a cluster that
  // can spare one.
  std::vector<Index> sizes(n_clusters, 0);
  for (Index c : assign) ++sizes[c];
  for (Index c = 0; c < n_clusters; ++c) {
    if (sizes[c] > 0) continue;
    Index worst = -1;
    for (Index e = 0; e < static_cast<Index>(assign.size()); ++e)
      if (sizes[assign[e]] > 1 && (worst < 0 || own_cost[e] > own_cost[worst])) worst = e;
    if (worst < 0) break;
    --sizes[assign[worst]];
    assign[worst] = c;
    ++sizes[c];
    own_cost[worst] = 0.0;
    changed = true;
  }
  return changed;
}

}  // namespace

CoclusterModel train_cocluster(std::shared_ptr<const RatingMatrix> matrix,
                               const CoclusterOptions& options) {
  if (!matrix || matrix->nnz() == 0) throw ConfigError("train_cocluster needs a non-empty matrix");
  if (options.row_clusters < 1 || options.col_clusters < 1)
    throw ConfigError("cocluster counts must be at least 1");
  if (options.max_iters < 1) throw ConfigError("cocluster max_iters must be at least 1");

  CoclusterModel model;
  model.matrix = matrix;
  model.options = options;
  const Index r = std::min(options.row_clusters, matrix->n_users());
  const Index s = std::min(options.col_clusters, matrix->n_items());
  model.options.row_clusters = r;
  model.options.col_clusters = s;
  model.row_avg = Eigen::VectorXd::Zero(r);
  model.col_avg = Eigen::VectorXd::Zero(s);
  model.cocluster_avg = Eigen::MatrixXd::Zero(r, s);

  // Random start with every cluster populated.
  Rng rng(options.seed);
  auto init = [&](std::vector<Index>& assign, Index n, Index clusters) {
    std::vector<Index> order(n);
    for (Index e = 0; e < n; ++e) order[e] = e;
    shuffle(order, rng);
    assign.assign(n, 0);
    for (Index k = 0; k < n; ++k)
      assign[order[k]] = k < clusters ? k : static_cast<Index>(uniform_below(rng, clusters));
  };
  init(model.row_assign, matrix->n_users(), r);
  init(model.col_assign, matrix->n_items(), s);
  auto start_from = [](std::vector<Index>& assign, const std::vector<Index>& given,
                       Index clusters) {
    if (given.empty()) return;
    if (given.size() != assign.size()) throw ConfigError("initial partition has the wrong size");
    for (Index c : given)
      if (c < 0 || c >= clusters) throw ConfigError("initial partition label out of range");
    assign = given;
  };
  start_from(model.row_assign, options.initial_rows, r);
  start_from(model.col_assign, options.initial_cols, s);
  update_summaries(model);
  double prev = training_error(model);
  model.objective_trace.push_back(prev);

  for (int it = 1; it <= options.max_iters; ++it) {
    CoclusterModel saved = model;
    bool changed = reassign(model, true);
    update_summaries(model);
    changed = reassign(model, false) || changed;
    update_summaries(model);
    const double err = training_error(model);
    if (err > prev) {
      model = std::move(saved);
      model.converged = true;
      break;
    }
    model.objective_trace.push_back(err);
    model.iterations = it;
    prev = err;
    if (!changed) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace usbcf
