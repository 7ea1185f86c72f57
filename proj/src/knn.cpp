#include "usbcf/knn.hpp"

#include <algorithm>
#include <cmath>

#include "usbcf/parallel.hpp"

namespace usbcf {

RatingView::RatingView(std::shared_ptr<const RatingMatrix> base)
    : base_(std::move(base)), full_(true) {
  if (!base_) throw ConfigError("RatingView over a null matrix");
  user_means_ = base_->user_means();
  item_means_ = base_->item_means();
}

RatingView::RatingView(std::shared_ptr<const RatingMatrix> base,
                       std::vector<Index> users, std::vector<Index> items)
    : base_(std::move(base)), full_(false), users_(std::move(users)), items_(std::move(items)) {
  if (!base_) throw ConfigError("RatingView over a null matrix");
  if (!std::is_sorted(users_.begin(), users_.end()) ||
      !std::is_sorted(items_.begin(), items_.end()))
    throw ConfigError("RatingView subsets must be sorted");
  user_local_.assign(base_->n_users(), -1);
  item_local_.assign(base_->n_items(), -1);
  for (std::size_t k = 0; k < users_.size(); ++k) user_local_.at(users_[k]) = static_cast<Index>(k);
  for (std::size_t k = 0; k < items_.size(); ++k) item_local_.at(items_[k]) = static_cast<Index>(k);
  compute_means();
}

Index RatingView::n_users() const {
  return full_ ? base_->n_users() : static_cast<Index>(users_.size());
}

Index RatingView::n_items() const {
  return full_ ? base_->n_items() : static_cast<Index>(items_.size());
}

void RatingView::compute_means() {
  const RatingMatrix& m = *base_;
  user_means_ = Eigen::VectorXd::Zero(n_users());
  item_means_ = Eigen::VectorXd::Zero(n_items());
  for (std::size_t lu = 0; lu < users_.size(); ++lu) {
    const auto items = m.row_items(users_[lu]);
    const auto values = m.row_values(users_[lu]);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < items.size(); ++k)
      if (item_local_[items[k]] >= 0) {
        sum += values[k];
        ++n;
      }
    if (n) user_means_[lu] = sum / n;
  }
  for (std::size_t li = 0; li < items_.size(); ++li) {
    const auto users = m.col_users(items_[li]);
    const auto values = m.col_values(items_[li]);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < users.size(); ++k)
      if (user_local_[users[k]] >= 0) {
        sum += values[k];
        ++n;
      }
    if (n) item_means_[li] = sum / n;
  }
}

KnnModel::KnnModel(RatingView view, KnnOptions options)
    : view_(std::move(view)), options_(options) {
  if (options_.k < 1) throw ConfigError("knn k must be at least 1");
  if (!options_.precompute) return;
  const bool user_mode = options_.mode == KnnMode::User;
  const Index n = user_mode ? view_.n_users() : view_.n_items();
  auto parent = [&](Index local) -> Index {
    if (view_.is_full()) return local;
    return user_mode ? view_.users()[local] : view_.items()[local];
  };
  dense_ = Eigen::MatrixXd::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), options_.threads, [&](std::size_t a) {
    const Index pa = parent(static_cast<Index>(a));
    for (Index b = static_cast<Index>(a) + 1; b < n; ++b) {
      const double s = compute_similarity(pa, parent(b));
      dense_(a, b) = s;
      dense_(b, a) = s;
    }
  });
}

void KnnModel::set_dense_similarity(Eigen::MatrixXd sim) {
  const Index n = options_.mode == KnnMode::User ? view_.n_users() : view_.n_items();
  if (sim.rows() != n || sim.cols() != n)
    throw DataError("similarity matrix shape does not match the model");
  dense_ = std::move(sim);
}

double KnnModel::compute_similarity(Index a, Index b) const {
  const RatingMatrix& m = view_.base();
  const bool user_mode = options_.mode == KnnMode::User;
  // Item mode walks co-raters of two items; user mode walks items co-rated
  // by two users. Centering always uses the rating user's mean.
  const auto ia = user_mode ? m.row_items(a) : m.col_users(a);
  const auto va = user_mode ? m.row_values(a) : m.col_values(a);
  const auto ib = user_mode ? m.row_items(b) : m.col_users(b);
  const auto vb = user_mode ? m.row_values(b) : m.col_values(b);
  const double mean_a = user_mode ? view_.user_mean(a) : 0.0;
  const double mean_b = user_mode ? view_.user_mean(b) : 0.0;
  double xy = 0.0, xx = 0.0, yy = 0.0;
  int support = 0;
  std::size_t x = 0, y = 0;
  while (x < ia.size() && y < ib.size()) {
    if (ia[x] < ib[y]) {
      ++x;
    } else if (ib[y] < ia[x]) {
      ++y;
    } else {
      const Index shared = ia[x];
      const bool inside = user_mode ? view_.has_item(shared) : view_.has_user(shared);
      if (inside) {
        const double ma = user_mode ? mean_a : view_.user_mean(shared);
        const double mb = user_mode ? mean_b : ma;
        const double da = va[x] - ma, db = vb[y] - mb;
        xy += da * db;
        xx += da * da;
        yy += db * db;
        ++support;
      }
      ++x;
      ++y;
    }
  }
  if (support < options_.min_support || xx == 0.0 || yy == 0.0) return 0.0;
  return std::clamp(xy / (std::sqrt(xx) * std::sqrt(yy)), -1.0, 1.0);
}

double KnnModel::similarity(Index a, Index b) const {
  if (a == b) return 0.0;
  if (has_dense_similarity()) {
    const bool user_mode = options_.mode == KnnMode::User;
    const Index la = user_mode ? view_.local_user(a) : view_.local_item(a);
    const Index lb = user_mode ? view_.local_user(b) : view_.local_item(b);
    return dense_(la, lb);
  }
  return compute_similarity(a, b);
}

namespace {

struct Neighbor {
  Index entity;
  double sim;
  double rating;
};

void keep_top_k(std::vector<Neighbor>& n, int k) {
  auto better = [](const Neighbor& a, const Neighbor& b) {
    return a.sim != b.sim ? a.sim > b.sim : a.entity < b.entity;
  };
  const std::size_t take = std::min(n.size(), static_cast<std::size_t>(k));
  std::partial_sort(n.begin(), n.begin() + take, n.end(), better);
  n.resize(take);
}

}  // namespace

std::optional<double> KnnModel::predict_index(Index user, Index item) const {
  if (user < 0 || item < 0 || !view_.has_user(user) || !view_.has_item(item))
    return std::nullopt;
  const RatingMatrix& m = view_.base();
  std::vector<Neighbor> neighbors;
  if (options_.mode == KnnMode::Item) {
    const auto items = m.row_items(user);
    const auto values = m.row_values(user);
    for (std::size_t k = 0; k < items.size(); ++k) {
      const Index j = items[k];
      if (j == item || !view_.has_item(j)) continue;
      const double s = similarity(item, j);
      if (s > 0.0) neighbors.push_back({j, s, values[k]});
    }
  } else {
    const auto users = m.col_users(item);
    const auto values = m.col_values(item);
    for (std::size_t k = 0; k < users.size(); ++k) {
      const Index v = users[k];
      if (v == user || !view_.has_user(v)) continue;
      const double s = similarity(user, v);
      if (s > 0.0) neighbors.push_back({v, s, values[k]});
    }
  }
  if (neighbors.empty()) return std::nullopt;
  keep_top_k(neighbors, options_.k);

  double num = 0.0, den = 0.0, base = 0.0;
  if (options_.mode == KnnMode::User) {
    base = view_.user_mean(user);
    for (const auto& n : neighbors) {
      num += n.sim * (n.rating - view_.user_mean(n.entity));
      den += n.sim;
    }
  } else if (options_.centering == Centering::ItemMeans) {
    base = view_.item_mean(item);
    for (const auto& n : neighbors) {
      num += n.sim * (n.rating - view_.item_mean(n.entity));
      den += n.sim;
    }
  } else {
    base = view_.user_mean(user);
    for (const auto& n : neighbors) {
      num += n.sim * (n.rating - base);
      den += n.sim;
    }
  }
  return m.scale().clamp(base + num / den);
}

std::optional<double> KnnModel::predict(EntityId user, EntityId item) const {
  const auto u = view_.base().find_user(user);
  const auto i = view_.base().find_item(item);
  if (!u || !i) return std::nullopt;
  return predict_index(*u, *i);
}

KnnModel train_knn(std::shared_ptr<const RatingMatrix> matrix, KnnOptions options) {
  return KnnModel(RatingView(std::move(matrix)), options);
}

}  // namespace usbcf
