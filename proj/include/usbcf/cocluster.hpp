#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "usbcf/data.hpp"
#include "usbcf/predictor.hpp"

namespace usbcf {

struct CoclusterOptions {
  Index row_clusters = 3;
  Index col_clusters = 3;
  int max_iters = 20;
  std::uint64_t seed = 42;
  /// Optional starting partition (replaces the seeded random start).
  std::vector<Index> initial_rows;
  std::vector<Index> initial_cols;
};

/// Checkerboard partition of users x items with the summary averages used by
/// the prediction rule
///   r = A[g,h] + (user_avg - row_avg[g]) + (item_avg - col_avg[h]).
struct CoclusterModel : public Predictor {
  std::shared_ptr<const RatingMatrix> matrix;
  CoclusterOptions options;
  std::vector<Index> row_assign;  // user -> row cluster
  std::vector<Index> col_assign;  // item -> column cluster
  Eigen::MatrixXd cocluster_avg;  // r x s
  Eigen::VectorXd row_avg;        // per row cluster
  Eigen::VectorXd col_avg;        // per column cluster
  /// Sum of squared residuals over training cells after each iteration.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;

  std::string name() const override { return "cocluster"; }
  std::optional<double> predict(EntityId user, EntityId item) const override;
  double predict_value(EntityId user, EntityId item) const;
  /// Unclamped reconstruction for a known user and item.
  double reconstruct(Index user, Index item) const;
};

/// Recomputes the cluster summaries from the assignments.
void update_summaries(CoclusterModel& model);
/// Sum of squared residuals of `reconstruct` over the training cells.
double training_error(const CoclusterModel& model);

/// Alternating minimization: reassign users against the current summaries,
/// refresh them, reassign items, refresh again. Stops when no assignment
/// changes, after max_iters, or when an iteration would raise the training
/// error (that iteration is discarded). Empty clusters are re-seeded with
/// the entity whose residual is largest.
CoclusterModel train_cocluster(std::shared_ptr<const RatingMatrix> matrix,
                               const CoclusterOptions& options = {});

}  // namespace usbcf
