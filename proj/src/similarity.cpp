#include "usbcf/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "text_util.hpp"

namespace usbcf {

UserProfile profile_of(const RatingMatrix& matrix, Index user) {
  return {user, matrix.row_items(user), matrix.row_values(user)};
}

namespace {

// Walks the sorted intersection of the profile and the bicluster items.
template <typename Fn>
void for_shared(const UserProfile& p, const Bicluster& b, Fn&& fn) {
  std::size_t x = 0, y = 0;
  while (x < p.items.size() && y < b.items.size()) {
    if (p.items[x] < b.items[y]) {
      ++x;
    } else if (b.items[y] < p.items[x]) {
      ++y;
    } else {
      fn(p.ratings[x], b.pattern[y]);
      ++x;
      ++y;
    }
  }
}

double fit_from(std::uint32_t shared, double squared_error, RatingScale scale) {
  if (shared == 0) return 0.0;
  const double rmse = std::sqrt(squared_error / shared);
  return std::clamp(1.0 - rmse / scale.span(), 0.0, 1.0);
}

}  // namespace

double sim_match(const UserProfile& profile, const Bicluster& bicluster) {
  if (bicluster.items.empty()) throw ConfigError("sim_match on a bicluster without items");
  std::size_t shared = 0;
  for_shared(profile, bicluster, [&](double, double) { ++shared; });
  return static_cast<double>(shared) / bicluster.items.size();
}

double sim_fit(const UserProfile& profile, const Bicluster& bicluster,
               RatingScale scale) {
  std::uint32_t shared = 0;
  double sq = 0.0;
  for_shared(profile, bicluster, [&](double r, double k) {
    ++shared;
    sq += (r - k) * (r - k);
  });
  return fit_from(shared, sq, scale);
}

double user_bicluster_similarity(const UserProfile& profile,
                                 const Bicluster& bicluster, RatingScale scale) {
  return sim_match(profile, bicluster) * sim_fit(profile, bicluster, scale);
}

BiclusterIndex::BiclusterIndex(const BiclusterSet& set, Index n_items)
    : set_(&set), offsets_(static_cast<std::size_t>(n_items) + 1, 0) {
  for (const auto& b : set.biclusters)
    for (Index i : b.items) {
      if (i < 0 || i >= n_items) throw ConfigError("bicluster item outside the matrix");
      ++offsets_[i + 1];
    }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  postings_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t k = 0; k < set.biclusters.size(); ++k) {
    const auto& b = set.biclusters[k];
    for (std::size_t j = 0; j < b.items.size(); ++j)
      postings_[fill[b.items[j]]++] = {k, b.pattern[j]};
  }
  user_offsets_.reserve(set.size() + 1);
  item_offsets_.reserve(set.size() + 1);
  user_offsets_.push_back(0);
  item_offsets_.push_back(0);
  for (const auto& b : set.biclusters) {
    users_.insert(users_.end(), b.users.begin(), b.users.end());
    items_.insert(items_.end(), b.items.begin(), b.items.end());
    user_offsets_.push_back(users_.size());
    item_offsets_.push_back(items_.size());
    if (!b.users.empty()) n_users_ = std::max(n_users_, b.users.back() + 1);
  }
}

std::span<const BiclusterIndex::Posting> BiclusterIndex::postings(Index item) const {
  return {postings_.data() + offsets_[item], offsets_[item + 1] - offsets_[item]};
}

void BiclusterIndex::overlap(const UserProfile& profile,
                             std::vector<std::uint32_t>& shared,
                             std::vector<double>& squared_error) const {
  shared.assign(set_->size(), 0);
  squared_error.assign(set_->size(), 0.0);
  for (std::size_t x = 0; x < profile.items.size(); ++x) {
    const Index item = profile.items[x];
    if (item < 0 || static_cast<std::size_t>(item) + 1 >= offsets_.size()) continue;
    const double r = profile.ratings[x];
    for (const Posting& p : postings(item)) {
      ++shared[p.bicluster];
      squared_error[p.bicluster] += (r - p.value) * (r - p.value);
    }
  }
}

namespace {

template <typename UsersOf, typename ItemsOf>
void merge_with(Neighborhood& hood, Index n_users, Index n_items, UsersOf users_of,
                ItemsOf items_of) {
  std::vector<char> user_seen(std::max(n_users, hood.active_user + 1), 0), item_seen(n_items, 0);
  user_seen[hood.active_user] = 1;
  for (const auto& m : hood.members) {
    for (Index u : users_of(m.id)) user_seen[u] = 1;
    for (Index i : items_of(m.id)) item_seen[i] = 1;
  }
  auto collect = [](const std::vector<char>& seen) {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1)));
    for (std::size_t k = 0; k < seen.size(); ++k)
      if (seen[k]) out.push_back(static_cast<Index>(k));
    return out;
  };
  hood.merged_users = collect(user_seen);
  hood.merged_items = collect(item_seen);
}

}  // namespace

void merge_members(Neighborhood& hood, const BiclusterSet& set) {
  Index n_users = 0, n_items = 0;
  for (const auto& m : hood.members) {
    const auto& b = set.biclusters[m.id];
    if (!b.users.empty()) n_users = std::max(n_users, b.users.back() + 1);
    if (!b.items.empty()) n_items = std::max(n_items, b.items.back() + 1);
  }
  merge_with(
      hood, n_users, n_items,
      [&](std::uint32_t id) -> const std::vector<Index>& { return set.biclusters[id].users; },
      [&](std::uint32_t id) -> const std::vector<Index>& { return set.biclusters[id].items; });
}

void merge_members(Neighborhood& hood, const BiclusterIndex& index) {
  merge_with(
      hood, index.n_users(), index.n_items(),
      [&](std::uint32_t id) { return index.users_of(id); },
      [&](std::uint32_t id) { return index.items_of(id); });
}

Neighborhood select_neighborhood_usbcf(const UserProfile& profile,
                                       const BiclusterIndex& index,
                                       double min_sim, RatingScale scale) {
  if (!(min_sim >= 0.0 && min_sim <= 1.0)) throw ConfigError("minSim must lie in [0, 1]");
  const BiclusterSet& set = index.set();
  std::vector<std::uint32_t> shared;
  std::vector<double> sq;
  index.overlap(profile, shared, sq);
  Neighborhood hood;
  hood.active_user = profile.user;
  for (std::uint32_t k = 0; k < set.size(); ++k) {
    if (shared[k] == 0 && min_sim > 0.0) continue;
    const auto n_items = index.items_of(k).size();
    const double match = static_cast<double>(shared[k]) / n_items;
    if (match < min_sim) continue;  // fit <= 1, so the product cannot reach min_sim
    const double fit = fit_from(shared[k], sq[k], scale);
    const double score = match * fit;
    if (score >= min_sim) hood.members.push_back({k, match, fit, score});
  }
  merge_members(hood, index);
  return hood;
}

Neighborhood select_neighborhood_usbcf(const UserProfile& profile,
                                       const BiclusterSet& set, double min_sim,
                                       RatingScale scale) {
  Index n_items = 0;
  for (const auto& b : set.biclusters)
    if (!b.items.empty()) n_items = std::max(n_items, b.items.back() + 1);
  return select_neighborhood_usbcf(profile, BiclusterIndex(set, n_items), min_sim, scale);
}

Neighborhood select_neighborhood_bbcf(const UserProfile& profile,
                                      const BiclusterIndex& index,
                                      std::size_t nnbics) {
  if (nnbics < 1) throw ConfigError("nnbics must be at least 1");
  const BiclusterSet& set = index.set();
  std::vector<std::uint32_t> shared;
  std::vector<double> sq;
  index.overlap(profile, shared, sq);
  std::vector<ScoredBicluster> scored;
  scored.reserve(set.size());
  for (std::uint32_t k = 0; k < set.size(); ++k) {
    const double match = static_cast<double>(shared[k]) / index.items_of(k).size();
    scored.push_back({k, match, 0.0, match * static_cast<double>(index.users_of(k).size())});
  }
  auto better = [&](const ScoredBicluster& a, const ScoredBicluster& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto ua = index.users_of(a.id).size(), ub = index.users_of(b.id).size();
    if (ua != ub) return ua > ub;
    return a.id < b.id;
  };
  const std::size_t take = std::min(nnbics, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  scored.resize(take);
  Neighborhood hood;
  hood.active_user = profile.user;
  hood.members = std::move(scored);
  merge_members(hood, index);
  return hood;
}

Neighborhood select_neighborhood_bbcf(const UserProfile& profile,
                                      const BiclusterSet& set,
                                      std::size_t nnbics) {
  Index n_items = 0;
  for (const auto& b : set.biclusters)
    if (!b.items.empty()) n_items = std::max(n_items, b.items.back() + 1);
  return select_neighborhood_bbcf(profile, BiclusterIndex(set, n_items), nnbics);
}

PersonalizedMatrix build_personalized_matrix(const RatingMatrix& matrix,
                                             const Neighborhood& hood) {
  std::vector<Index> item_local(matrix.n_items(), -1);
  for (std::size_t k = 0; k < hood.merged_items.size(); ++k)
    item_local[hood.merged_items[k]] = static_cast<Index>(k);

  std::vector<EntityId> user_ids, item_ids;
  for (Index u : hood.merged_users) user_ids.push_back(matrix.user_id(u));
  for (Index i : hood.merged_items) item_ids.push_back(matrix.item_id(i));
  std::vector<Cell> cells;
  for (std::size_t lu = 0; lu < hood.merged_users.size(); ++lu) {
    const Index u = hood.merged_users[lu];
    const auto items = matrix.row_items(u);
    const auto values = matrix.row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k)
      if (item_local[items[k]] >= 0)
        cells.push_back({static_cast<Index>(lu), item_local[items[k]], values[k]});
  }
  return {RatingMatrix(std::move(user_ids), std::move(item_ids), cells, matrix.scale()),
          hood.merged_users, hood.merged_items};
}

void write_neighborhoods(std::ostream& out, std::span<const Neighborhood> hoods,
                         const RatingMatrix& matrix) {
  out << "usbcf-neighborhoods 1\n";
  for (const auto& h : hoods) {
    out << "user " << matrix.user_id(h.active_user) << " members " << h.members.size()
        << " users " << h.merged_users.size() << " items " << h.merged_items.size()
        << '\n';
    for (const auto& m : h.members)
      out << m.id << '\t' << detail::format_double(m.match) << '\t'
          << detail::format_double(m.fit) << '\t' << detail::format_double(m.score)
          << '\n';
  }
}

}  // namespace usbcf
