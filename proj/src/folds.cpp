#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "usbcf/data.hpp"
#include "usbcf/random.hpp"

namespace usbcf {

namespace {

void sort_by_key(std::vector<Rating>& triples) {
  std::sort(triples.begin(), triples.end(), [](const Rating& a, const Rating& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
}

void check_folds(const RatingDataset& data, int k_folds) {
  if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
  if (static_cast<std::size_t>(k_folds) > data.size())
    throw ConfigError("k_folds (" + std::to_string(k_folds) +
                      ") exceeds dataset size (" + std::to_string(data.size()) + ")");
}

// Fold f receives positions [bounds[f], bounds[f+1]) of `order`.
std::vector<std::size_t> fold_bounds(std::size_t n, int k) {
  std::vector<std::size_t> bounds(k + 1, 0);
  const std::size_t base = n / k, extra = n % k;
  for (int f = 0; f < k; ++f)
    bounds[f + 1] = bounds[f] + base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
  return bounds;
}

}  // namespace

std::vector<FoldSplit> split_folds(const RatingDataset& data, int k_folds,
                                   std::uint64_t seed) {
  check_folds(data, k_folds);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);
  const auto bounds = fold_bounds(order.size(), k_folds);

  std::vector<int> fold_of(data.size());
  for (int f = 0; f < k_folds; ++f)
    for (std::size_t p = bounds[f]; p < bounds[f + 1]; ++p) fold_of[order[p]] = f;

  std::vector<FoldSplit> folds(k_folds);
  for (int f = 0; f < k_folds; ++f) {
    folds[f].fold_id = f + 1;
    folds[f].train.scale = folds[f].test.scale = data.scale;
  }
  // Both sides keep the original record order.
  for (std::size_t r = 0; r < data.size(); ++r)
    for (int f = 0; f < k_folds; ++f)
      (fold_of[r] == f ? folds[f].test : folds[f].train)
          .triples.push_back(data.triples[r]);
  return folds;
}

std::vector<FoldSplit> block_folds(const RatingDataset& data, int k_folds) {
  check_folds(data, k_folds);
  const auto bounds = fold_bounds(data.size(), k_folds);
  std::vector<FoldSplit> folds(k_folds);
  for (int f = 0; f < k_folds; ++f) {
    FoldSplit& fold = folds[f];
    fold.fold_id = f + 1;
    fold.train.scale = fold.test.scale = data.scale;
    for (std::size_t r = 0; r < data.size(); ++r)
      (r >= bounds[f] && r < bounds[f + 1] ? fold.test : fold.train)
          .triples.push_back(data.triples[r]);
    sort_by_key(fold.train.triples);
    sort_by_key(fold.test.triples);
  }
  return folds;
}

std::optional<std::vector<FoldSplit>> load_canonical_folds(
    const std::filesystem::path& dir, int k_folds, RatingScale scale) {
  std::vector<FoldSplit> folds;
  for (int f = 1; f <= k_folds; ++f) {
    const auto base = dir / ("u" + std::to_string(f) + ".base");
    const auto test = dir / ("u" + std::to_string(f) + ".test");
    if (!std::filesystem::exists(base) || !std::filesystem::exists(test))
      return std::nullopt;
  }
  for (int f = 1; f <= k_folds; ++f) {
    FoldSplit fold;
    fold.fold_id = f;
    fold.train = load_ratings(dir / ("u" + std::to_string(f) + ".base"), scale);
    fold.test = load_ratings(dir / ("u" + std::to_string(f) + ".test"), scale);
    folds.push_back(std::move(fold));
  }
  return folds;
}

}  // namespace usbcf
