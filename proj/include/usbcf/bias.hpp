#pragma once

#include <memory>

#include <Eigen/Dense>

#include "usbcf/data.hpp"
#include "usbcf/predictor.hpp"

namespace usbcf {

/// Baseline r = mu + b_user + b_item with damped-mean biases.
class BiasModel : public Predictor {
 public:
  BiasModel(std::shared_ptr<const RatingMatrix> matrix, double mu,
            Eigen::VectorXd b_user, Eigen::VectorXd b_item, double lambda_item,
            double lambda_user);

  std::string name() const override { return "bias"; }
  std::optional<double> predict(EntityId user, EntityId item) const override;

  /// Always answers; unseen entities contribute zero bias.
  double predict_value(EntityId user, EntityId item) const;

  double mu() const { return mu_; }
  const Eigen::VectorXd& user_bias() const { return b_user_; }
  const Eigen::VectorXd& item_bias() const { return b_item_; }
  double lambda_item() const { return lambda_item_; }
  double lambda_user() const { return lambda_user_; }
  const std::shared_ptr<const RatingMatrix>& matrix() const { return matrix_; }

 private:
  std::shared_ptr<const RatingMatrix> matrix_;
  double mu_;
  Eigen::VectorXd b_user_, b_item_;
  double lambda_item_, lambda_user_;
};

/// One pass: b_i = sum(r - mu) / (lambda_item + |R_i|), then
/// b_u = sum(r - mu - b_i) / (lambda_user + |R_u|).
BiasModel train_bias(std::shared_ptr<const RatingMatrix> matrix,
                     double lambda_item = 10.0, double lambda_user = 10.0);

}  // namespace usbcf
