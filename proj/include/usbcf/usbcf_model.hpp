#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "usbcf/knn.hpp"
#include "usbcf/miner.hpp"
#include "usbcf/predictor.hpp"
#include "usbcf/similarity.hpp"

namespace usbcf {

enum class NeighborhoodRule {
  Threshold,  // every bicluster with match * fit >= min_sim
  TopK,       // the nnbics biclusters with highest weighted frequency
};

struct UsbcfOptions {
  NeighborhoodRule rule = NeighborhoodRule::Threshold;
  double min_sim = 0.25;
  std::size_t nnbics = 50;
  int inner_k = 20;
  Centering centering = Centering::ItemMeans;
  /// Keep per-user member lists (memory heavy; for dumps and tests).
  bool keep_members = false;
  int threads = 1;
};

/// One personalized model: the selected neighborhood and an item-based KNN
/// trained on the matrix restricted to its merged users and items.
struct UserModel {
  Neighborhood neighborhood;  // members only kept when requested
  std::size_t member_count = 0;
  std::optional<KnnModel> inner;  // absent when merged_items is empty
};

class UsbcfModel : public Predictor {
 public:
  UsbcfModel(std::shared_ptr<const RatingMatrix> matrix, UsbcfOptions options,
             std::vector<UserModel> users);

  std::string name() const override {
    return options_.rule == NeighborhoodRule::Threshold ? "usbcf" : "bbcf";
  }
  std::optional<double> predict(EntityId user, EntityId item) const override;
  std::optional<double> predict_index(Index user, Index item) const;

  const UserModel& user_model(Index user) const { return users_[user]; }
  const std::vector<UserModel>& user_models() const { return users_; }
  const UsbcfOptions& options() const { return options_; }
  const std::shared_ptr<const RatingMatrix>& matrix() const { return matrix_; }

  /// Mean merged rows / columns over all training users.
  double mean_personalized_users() const;
  double mean_personalized_items() const;

 private:
  std::shared_ptr<const RatingMatrix> matrix_;
  UsbcfOptions options_;
  std::vector<UserModel> users_;
};

/// Builds the personalized inner model for one user from a neighborhood.
UserModel build_user_model(const std::shared_ptr<const RatingMatrix>& matrix,
                           Neighborhood hood, const UsbcfOptions& options);

UsbcfModel train_usbcf(std::shared_ptr<const RatingMatrix> matrix,
                       const BiclusterSet& biclusters, UsbcfOptions options);

/// Same pipeline with the weighted-frequency top-K selector.
UsbcfModel train_bbcf(std::shared_ptr<const RatingMatrix> matrix,
                      const BiclusterSet& biclusters, std::size_t nnbics,
                      UsbcfOptions options);

}  // namespace usbcf
