#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "usbcf/common.hpp"

namespace usbcf {

struct Rating {
  EntityId user;
  EntityId item;
  double value;

  friend bool operator==(const Rating&, const Rating&) = default;
};

/// Flat list of (user, item, rating) triples on a bounded ordinal scale.
/// No (user, item) key appears twice.
struct RatingDataset {
  std::vector<Rating> triples;
  RatingScale scale;

  std::size_t size() const { return triples.size(); }
  bool empty() const { return triples.empty(); }
};

/// Parses the MovieLens `user<TAB>item<TAB>rating<TAB>timestamp` layout.
/// Accepts LF and CRLF line endings; the timestamp is validated and dropped.
/// Throws DataError on malformed lines, duplicate keys or out-of-scale values.
RatingDataset parse_ratings(std::istream& in, RatingScale scale = {});
RatingDataset parse_ratings(std::string_view text, RatingScale scale = {});
RatingDataset load_ratings(const std::filesystem::path& path,
                           RatingScale scale = {});

/// Versioned text cache format ("usbcf-ratings 1" header).
void write_dataset(std::ostream& out, const RatingDataset& data);
RatingDataset read_dataset(std::istream& in);

/// Throws DataError when a key repeats or a value falls outside the scale.
void validate(const RatingDataset& data);

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
using SparseCols = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

/// A cell addressed by dense indices.
struct Cell {
  Index user;
  Index item;
  double value;
};

/// Immutable sparse user x item matrix kept in both row-major and
/// column-major compressed form. Dense indices follow first appearance in the
/// source dataset; rows and columns are sorted by dense index.
class RatingMatrix {
 public:
  RatingMatrix(std::vector<EntityId> user_ids, std::vector<EntityId> item_ids,
               const std::vector<Cell>& cells, RatingScale scale);

  Index n_users() const { return static_cast<Index>(user_ids_.size()); }
  Index n_items() const { return static_cast<Index>(item_ids_.size()); }
  std::size_t nnz() const { return static_cast<std::size_t>(rows_.nonZeros()); }
  double sparsity() const;
  const RatingScale& scale() const { return scale_; }

  EntityId user_id(Index u) const { return user_ids_[u]; }
  EntityId item_id(Index i) const { return item_ids_[i]; }
  const std::vector<EntityId>& user_ids() const { return user_ids_; }
  const std::vector<EntityId>& item_ids() const { return item_ids_; }
  std::optional<Index> find_user(EntityId id) const;
  std::optional<Index> find_item(EntityId id) const;

  std::span<const Index> row_items(Index u) const {
    return {rows_.innerIndexPtr() + rows_.outerIndexPtr()[u],
            static_cast<std::size_t>(rows_.outerIndexPtr()[u + 1] -
                                     rows_.outerIndexPtr()[u])};
  }
  std::span<const double> row_values(Index u) const {
    return {rows_.valuePtr() + rows_.outerIndexPtr()[u], row_items(u).size()};
  }
  std::span<const Index> col_users(Index i) const {
    return {cols_.innerIndexPtr() + cols_.outerIndexPtr()[i],
            static_cast<std::size_t>(cols_.outerIndexPtr()[i + 1] -
                                     cols_.outerIndexPtr()[i])};
  }
  std::span<const double> col_values(Index i) const {
    return {cols_.valuePtr() + cols_.outerIndexPtr()[i], col_users(i).size()};
  }

  std::optional<double> rating(Index u, Index i) const;

  const SparseRows& rows() const { return rows_; }
  const SparseCols& cols() const { return cols_; }
  const Eigen::VectorXd& user_means() const { return user_means_; }
  const Eigen::VectorXd& item_means() const { return item_means_; }
  double global_mean() const { return global_mean_; }

  /// Triples in row-major order (user index, then item index).
  RatingDataset to_dataset() const;

 private:
  std::vector<EntityId> user_ids_, item_ids_;
  std::unordered_map<EntityId, Index> user_index_, item_index_;
  SparseRows rows_;
  SparseCols cols_;
  Eigen::VectorXd user_means_, item_means_;
  double global_mean_ = 0.0;
  RatingScale scale_;
};

/// Throws ConfigError on an empty dataset.
RatingMatrix build_matrix(const RatingDataset& data);

struct FoldSplit {
  RatingDataset train;
  RatingDataset test;
  int fold_id = 0;
};

/// Seeded random k-fold partition. Test sets differ in size by at most one.
std::vector<FoldSplit> split_folds(const RatingDataset& data, int k_folds,
                                   std::uint64_t seed);

/// Contiguous-block partition in file order with each side sorted by
/// (user, item): the scheme that generated MovieLens-100k's u1..u5 files.
std::vector<FoldSplit> block_folds(const RatingDataset& data, int k_folds);

/// Loads u1.base/u1.test ... u<k>.base/u<k>.test verbatim from `dir`.
/// Returns nullopt if any of the files is missing.
std::optional<std::vector<FoldSplit>> load_canonical_folds(
    const std::filesystem::path& dir, int k_folds, RatingScale scale = {});

}  // namespace usbcf
