#include "usbcf/usbcf_model.hpp"

#include "usbcf/parallel.hpp"

namespace usbcf {

UsbcfModel::UsbcfModel(std::shared_ptr<const RatingMatrix> matrix,
                       UsbcfOptions options, std::vector<UserModel> users)
    : matrix_(std::move(matrix)), options_(options), users_(std::move(users)) {
  if (!matrix_ || static_cast<Index>(users_.size()) != matrix_->n_users())
    throw ConfigError("one user model per training user is required");
}

std::optional<double> UsbcfModel::predict_index(Index user, Index item) const {
  if (user < 0 || user >= static_cast<Index>(users_.size()) || item < 0) return std::nullopt;
  const UserModel& um = users_[user];
  if (!um.inner || !um.inner->view().has_item(item)) return std::nullopt;
  return um.inner->predict_index(user, item);
}

std::optional<double> UsbcfModel::predict(EntityId user, EntityId item) const {
  const auto u = matrix_->find_user(user);
  const auto i = matrix_->find_item(item);
  if (!u || !i) return std::nullopt;
  return predict_index(*u, *i);
}

double UsbcfModel::mean_personalized_users() const {
  if (users_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& um : users_) total += um.neighborhood.merged_users.size();
  return total / users_.size();
}

double UsbcfModel::mean_personalized_items() const {
  if (users_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& um : users_) total += um.neighborhood.merged_items.size();
  return total / users_.size();
}

UserModel build_user_model(const std::shared_ptr<const RatingMatrix>& matrix,
                           Neighborhood hood, const UsbcfOptions& options) {
  UserModel um;
  um.member_count = hood.members.size();
  if (!hood.merged_items.empty()) {
    KnnOptions knn;
    knn.mode = KnnMode::Item;
    knn.k = options.inner_k;
    knn.centering = options.centering;
    knn.precompute = false;
    um.inner.emplace(RatingView(matrix, hood.merged_users, hood.merged_items), knn);
  }
  if (!options.keep_members) {
    hood.members.clear();
    hood.members.shrink_to_fit();
  }
  um.neighborhood = std::move(hood);
  return um;
}

namespace {

UsbcfModel train_personalized(std::shared_ptr<const RatingMatrix> matrix,
                              const BiclusterSet& biclusters, UsbcfOptions options) {
  if (!matrix) throw ConfigError("null training matrix");
  for (const auto& b : biclusters.biclusters) {
    if (!b.users.empty() && b.users.back() >= matrix->n_users())
      throw ConfigError("bicluster references a user outside the training matrix");
    if (b.items.empty()) throw ConfigError("bicluster without items");
  }
  const BiclusterIndex index(biclusters, matrix->n_items());
  std::vector<UserModel> users(matrix->n_users());
  parallel_for(users.size(), options.threads, [&](std::size_t u) {
    const UserProfile profile = profile_of(*matrix, static_cast<Index>(u));
    Neighborhood hood =
        options.rule == NeighborhoodRule::Threshold
            ? select_neighborhood_usbcf(profile, index, options.min_sim, matrix->scale())
            : select_neighborhood_bbcf(profile, index, options.nnbics);
    users[u] = build_user_model(matrix, std::move(hood), options);
  });
  return UsbcfModel(std::move(matrix), options, std::move(users));
}

}  // namespace

UsbcfModel train_usbcf(std::shared_ptr<const RatingMatrix> matrix,
                       const BiclusterSet& biclusters, UsbcfOptions options) {
  options.rule = NeighborhoodRule::Threshold;
  return train_personalized(std::move(matrix), biclusters, options);
}

UsbcfModel train_bbcf(std::shared_ptr<const RatingMatrix> matrix,
                      const BiclusterSet& biclusters, std::size_t nnbics,
                      UsbcfOptions options) {
  options.rule = NeighborhoodRule::TopK;
  options.nnbics = nnbics;
  return train_personalized(std::move(matrix), biclusters, options);
}

}  // namespace usbcf
