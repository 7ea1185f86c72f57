#include "usbcf/bias.hpp"

namespace usbcf {

BiasModel::BiasModel(std::shared_ptr<const RatingMatrix> matrix, double mu,
                     Eigen::VectorXd b_user, Eigen::VectorXd b_item,
                     double lambda_item, double lambda_user)
    : matrix_(std::move(matrix)),
      mu_(mu),
      b_user_(std::move(b_user)),
      b_item_(std::move(b_item)),
      lambda_item_(lambda_item),
      lambda_user_(lambda_user) {}

double BiasModel::predict_value(EntityId user, EntityId item) const {
  double r = mu_;
  if (auto u = matrix_->find_user(user)) r += b_user_[*u];
  if (auto i = matrix_->find_item(item)) r += b_item_[*i];
  return matrix_->scale().clamp(r);
}

std::optional<double> BiasModel::predict(EntityId user, EntityId item) const {
  return predict_value(user, item);
}

BiasModel train_bias(std::shared_ptr<const RatingMatrix> matrix,
                     double lambda_item, double lambda_user) {
  if (!matrix || matrix->nnz() == 0) throw ConfigError("train_bias needs a non-empty matrix");
  if (lambda_item < 0 || lambda_user < 0) throw ConfigError("bias damping must be >= 0");
  const RatingMatrix& m = *matrix;
  const double mu = m.global_mean();
  Eigen::VectorXd b_item = Eigen::VectorXd::Zero(m.n_items());
  for (Index i = 0; i < m.n_items(); ++i) {
    double sum = 0.0;
    for (double r : m.col_values(i)) sum += r - mu;
    const double denom = lambda_item + m.col_users(i).size();
    b_item[i] = denom > 0 ? sum / denom : 0.0;
  }
  Eigen::VectorXd b_user = Eigen::VectorXd::Zero(m.n_users());
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto items = m.row_items(u);
    const auto values = m.row_values(u);
    double sum = 0.0;
    for (std::size_t k = 0; k < items.size(); ++k) sum += values[k] - mu - b_item[items[k]];
    const double denom = lambda_user + items.size();
    b_user[u] = denom > 0 ? sum / denom : 0.0;
  }
  return BiasModel(std::move(matrix), mu, std::move(b_user), std::move(b_item),
                   lambda_item, lambda_user);
}

}  // namespace usbcf
