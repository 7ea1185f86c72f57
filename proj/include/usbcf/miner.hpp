#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "usbcf/data.hpp"

namespace usbcf {

/// A subset of users and a subset of items on which every user gave item
/// `items[j]` exactly the rating `pattern[j]` (constant values per item,
/// no noise). All three vectors are sorted by dense index / aligned.
struct Bicluster {
  std::vector<Index> users;
  std::vector<Index> items;
  std::vector<double> pattern;

  std::size_t area() const { return users.size() * items.size(); }
  /// Expected rating of `item`, or nullopt if the item is not in the bicluster.
  std::optional<double> expected(Index item) const;

  friend bool operator==(const Bicluster&, const Bicluster&) = default;
};

struct MineSettings {
  int min_cols = 3;
  int min_rows = 2;

  friend bool operator==(const MineSettings&, const MineSettings&) = default;
};

struct MineOptions {
  /// Stop after this many biclusters (0 = unlimited).
  std::size_t max_output = 500000;
  /// Explore at most this many extensions per enumeration node (0 = unlimited).
  std::size_t max_branching = 0;
  int threads = 1;
};

struct MineProvenance {
  MineSettings settings;
  std::size_t emitted = 0;
  bool output_capped = false;
  bool branching_capped = false;

  friend bool operator==(const MineProvenance&, const MineProvenance&) = default;
};

struct BiclusterSet {
  std::vector<Bicluster> biclusters;
  std::vector<MineProvenance> provenance;
  /// Every member is closed in the matrix it came from (mined output). Two
  /// distinct closed biclusters of one matrix never contain each other.
  bool closed = false;

  std::size_t size() const { return biclusters.size(); }
  bool empty() const { return biclusters.empty(); }
  bool capped() const;

  friend bool operator==(const BiclusterSet&, const BiclusterSet&) = default;
};

/// Canonical order: area descending, then item set, pattern and user set
/// lexicographically.
bool canonical_less(const Bicluster& a, const Bicluster& b);
void sort_canonical(std::vector<Bicluster>& biclusters);

/// Enumerates every maximal constant-per-item bicluster with at least
/// `min_cols` items and `min_rows` users. Each user is read as a transaction
/// of (item, rating) symbols; the output is the set of closed itemsets with
/// support >= min_rows and >= min_cols symbols, each paired with its full
/// supporting user set. Enumeration order is fixed (prefix-preserving closure
/// extension over symbols sorted by item, then value), so the output under a
/// cap is reproducible and independent of `threads`.
BiclusterSet mine(const RatingMatrix& matrix, MineSettings settings,
                  const MineOptions& options = {});

/// Union of solutions with duplicates and strictly contained members removed.
/// The containment scan is skipped when every input is closed.
BiclusterSet aggregate(std::span<const BiclusterSet> solutions);
/// Same, consuming the inputs to avoid a copy.
BiclusterSet aggregate(std::vector<BiclusterSet>&& solutions);

/// Upper binomial tail P[X >= |U|], X ~ Binomial(n_users, q), where q is the
/// product over the bicluster's items of the fraction of all users who gave
/// that item its pattern value.
double bicluster_p_value(const Bicluster& b, const RatingMatrix& matrix);

/// Keeps biclusters with p-value <= alpha. alpha must lie in (0, 1].
BiclusterSet significance_filter(const BiclusterSet& set,
                                 const RatingMatrix& matrix, double alpha);

/// True iff every user of `b` rated every item of `b` at the pattern value.
bool is_constant(const Bicluster& b, const RatingMatrix& matrix);

/// Text solution file: external ids, one record per bicluster, header naming
/// the settings. write -> read -> write is byte-identical.
void write_biclusters(std::ostream& out, const BiclusterSet& set,
                      const RatingMatrix& matrix);
/// Throws DataError for malformed files or ids unknown to `matrix`.
BiclusterSet read_biclusters(std::istream& in, const RatingMatrix& matrix);

}  // namespace usbcf
