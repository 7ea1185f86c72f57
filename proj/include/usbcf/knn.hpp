#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "usbcf/data.hpp"
#include "usbcf/predictor.hpp"

namespace usbcf {

/// A RatingMatrix seen through sorted user and item subsets. Means are those
/// of the restricted matrix. Local indices follow the parent's dense order,
/// so every sum over a view visits cells in the same order as the same sum
/// over the materialized submatrix.
class RatingView {
 public:
  /// The whole matrix.
  explicit RatingView(std::shared_ptr<const RatingMatrix> base);
  RatingView(std::shared_ptr<const RatingMatrix> base, std::vector<Index> users,
             std::vector<Index> items);

  const RatingMatrix& base() const { return *base_; }
  const std::shared_ptr<const RatingMatrix>& base_ptr() const { return base_; }
  bool is_full() const { return full_; }

  Index n_users() const;
  Index n_items() const;
  /// Parent indices of the view's users / items (empty for a full view).
  const std::vector<Index>& users() const { return users_; }
  const std::vector<Index>& items() const { return items_; }

  /// Local position of a parent index, or -1.
  Index local_user(Index parent) const { return full_ ? parent : user_local_[parent]; }
  Index local_item(Index parent) const { return full_ ? parent : item_local_[parent]; }
  bool has_user(Index parent) const { return local_user(parent) >= 0; }
  bool has_item(Index parent) const { return local_item(parent) >= 0; }

  /// Means by parent index (the entity must be in the view).
  double user_mean(Index parent) const { return user_means_[local_user(parent)]; }
  double item_mean(Index parent) const { return item_means_[local_item(parent)]; }

 private:
  void compute_means();

  std::shared_ptr<const RatingMatrix> base_;
  bool full_;
  std::vector<Index> users_, items_;
  std::vector<Index> user_local_, item_local_;
  Eigen::VectorXd user_means_, item_means_;
};

enum class KnnMode { User, Item };

/// Offsets used by item-mode aggregation: item means (adjusted-cosine style,
/// the default) or the active user's mean.
enum class Centering { ItemMeans, UserMeans };

struct KnnOptions {
  KnnMode mode = KnnMode::Item;
  int k = 20;
  Centering centering = Centering::ItemMeans;
  /// Pairs with fewer co-ratings get similarity 0.
  int min_support = 1;
  /// Precompute the full entity x entity similarity matrix; otherwise
  /// similarities are evaluated on demand (identical values).
  bool precompute = true;
  int threads = 1;
};

/// Neighborhood CF with mean-centered cosine similarity. Both modes center
/// by user means inside the similarity.
class KnnModel : public Predictor {
 public:
  KnnModel(RatingView view, KnnOptions options);

  std::string name() const override {
    return options_.mode == KnnMode::User ? "ubcf" : "ibcf";
  }
  std::optional<double> predict(EntityId user, EntityId item) const override;

  /// Prediction by parent dense indices.
  std::optional<double> predict_index(Index user, Index item) const;

  /// Similarity between two entities of the model's mode, by parent index.
  double similarity(Index a, Index b) const;

  const RatingView& view() const { return view_; }
  const KnnOptions& options() const { return options_; }
  bool has_dense_similarity() const { return dense_.size() > 0; }
  const Eigen::MatrixXd& dense_similarity() const { return dense_; }
  /// Replaces the similarity store (model loading). Must be
  /// n_entities x n_entities in local order.
  void set_dense_similarity(Eigen::MatrixXd sim);

 private:
  double compute_similarity(Index a, Index b) const;

  RatingView view_;
  KnnOptions options_;
  Eigen::MatrixXd dense_;
};

KnnModel train_knn(std::shared_ptr<const RatingMatrix> matrix, KnnOptions options);

}  // namespace usbcf
