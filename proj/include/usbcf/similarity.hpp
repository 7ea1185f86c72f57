#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "usbcf/data.hpp"
#include "usbcf/miner.hpp"

namespace usbcf {

/// The items a user rated, with the ratings, as stored in a RatingMatrix row.
struct UserProfile {
  Index user = -1;
  std::span<const Index> items;
  std::span<const double> ratings;
};

UserProfile profile_of(const RatingMatrix& matrix, Index user);

/// Fraction of the bicluster's items the user rated.
double sim_match(const UserProfile& profile, const Bicluster& bicluster);

/// 1 - RMSE(pattern, user ratings) / (r_max - r_min), the RMSE running over
/// the items both share. Defined as 0 when they share none.
double sim_fit(const UserProfile& profile, const Bicluster& bicluster,
               RatingScale scale);

/// sim_match * sim_fit.
double user_bicluster_similarity(const UserProfile& profile,
                                 const Bicluster& bicluster, RatingScale scale);

struct ScoredBicluster {
  std::uint32_t id;  // position in the BiclusterSet
  double match;
  double fit;
  double score;  // product for USBCF, weighted frequency for BBCF
};

struct Neighborhood {
  Index active_user = -1;
  std::vector<ScoredBicluster> members;
  std::vector<Index> merged_users;  // sorted, always holds active_user
  std::vector<Index> merged_items;  // sorted
};

/// Item -> (bicluster, expected value) postings, so scoring one user touches
/// only the biclusters that share an item with them.
class BiclusterIndex {
 public:
  BiclusterIndex(const BiclusterSet& set, Index n_items);

  struct Posting {
    std::uint32_t bicluster;
    double value;
  };
  std::span<const Posting> postings(Index item) const;
  const BiclusterSet& set() const { return *set_; }

  /// Per-bicluster overlap statistics for one user: shared item count and the
  /// sum of squared deviations from the pattern, accumulated in item order.
  void overlap(const UserProfile& profile, std::vector<std::uint32_t>& shared,
               std::vector<double>& squared_error) const;

  /// Contiguous copies of each member's users and items.
  std::span<const Index> users_of(std::uint32_t b) const {
    return {users_.data() + user_offsets_[b], user_offsets_[b + 1] - user_offsets_[b]};
  }
  std::span<const Index> items_of(std::uint32_t b) const {
    return {items_.data() + item_offsets_[b], item_offsets_[b + 1] - item_offsets_[b]};
  }
  Index n_users() const { return n_users_; }
  Index n_items() const { return static_cast<Index>(offsets_.size() - 1); }

 private:
  const BiclusterSet* set_;
  std::vector<std::size_t> offsets_;
  std::vector<Posting> postings_;
  std::vector<std::size_t> user_offsets_, item_offsets_;
  std::vector<Index> users_, items_;
  Index n_users_ = 0;
};

/// Every bicluster whose similarity with the user is >= min_sim.
Neighborhood select_neighborhood_usbcf(const UserProfile& profile,
                                       const BiclusterIndex& index,
                                       double min_sim, RatingScale scale);
Neighborhood select_neighborhood_usbcf(const UserProfile& profile,
                                       const BiclusterSet& set, double min_sim,
                                       RatingScale scale);

/// The `nnbics` biclusters with highest weighted frequency
/// |I_u & I_k| / |I_k| * |U_k|; ties go to more users, then lower id.
Neighborhood select_neighborhood_bbcf(const UserProfile& profile,
                                      const BiclusterIndex& index,
                                      std::size_t nnbics);
Neighborhood select_neighborhood_bbcf(const UserProfile& profile,
                                      const BiclusterSet& set,
                                      std::size_t nnbics);

/// Sets merged_users / merged_items from the members (plus the active user).
void merge_members(Neighborhood& neighborhood, const BiclusterSet& set);
void merge_members(Neighborhood& neighborhood, const BiclusterIndex& index);

/// The original matrix restricted to the neighborhood's users and items.
/// Local indices follow the parent's dense order and the local matrix keeps
/// the parent's external ids.
struct PersonalizedMatrix {
  RatingMatrix matrix;
  std::vector<Index> users;  // local -> parent dense index
  std::vector<Index> items;
};

PersonalizedMatrix build_personalized_matrix(const RatingMatrix& matrix,
                                             const Neighborhood& neighborhood);

/// Debug listing: one header line per user followed by one line per member
/// (bicluster id, match, fit, score).
void write_neighborhoods(std::ostream& out, std::span<const Neighborhood> hoods,
                         const RatingMatrix& matrix);

}  // namespace usbcf
