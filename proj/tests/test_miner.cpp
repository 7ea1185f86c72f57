#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "usbcf/miner.hpp"

using namespace usbcf;

namespace {

RatingMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  RatingDataset d;
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t i = 0; i < rows[u].size(); ++i)
      if (rows[u][i] > 0) d.triples.push_back({EntityId(u), EntityId(i), double(rows[u][i])});
  return build_matrix(d);
}

long double binomial_tail_sum(int n, int k, long double p) {
  long double total = 0;
  for (int j = k; j <= n; ++j) {
    long double c = 1;
    for (int t = 0; t < j; ++t) c = c * (n - t) / (t + 1);
    total += c * std::pow(p, j) * std::pow(1 - p, n - j);
  }
  return total;
}

double oracle_p_value(const Bicluster& b, const RatingMatrix& m) {
  long double q = 1;
  for (std::size_t j = 0; j < b.items.size(); ++j) {
    int same = 0;
    for (Index u = 0; u < m.n_users(); ++u)
      if (m.rating(u, b.items[j]) == b.pattern[j]) ++same;
    q *= static_cast<long double>(same) / m.n_users();
  }
  return static_cast<double>(binomial_tail_sum(m.n_users(), int(b.users.size()), q));
}

}  // namespace

TEST_CASE("fully constant 2x2 matrix") {
  const auto m = from_rows({{5, 5}, {5, 5}});
  const auto s = mine(m, {2, 2});
  REQUIRE(s.size() == 1);
  CHECK(s.biclusters[0].users == std::vector<Index>{0, 1});
  CHECK(s.biclusters[0].items == std::vector<Index>{0, 1});
  CHECK(s.biclusters[0].pattern == std::vector<double>{5, 5});
  CHECK(s.closed);
}

TEST_CASE("single shared column") {
  const auto m = from_rows({{5, 3}, {5, 1}});
  const auto s = mine(m, {1, 2});
  REQUIRE(s.size() == 1);
  CHECK(s.biclusters[0].users == std::vector<Index>{0, 1});
  CHECK(s.biclusters[0].items == std::vector<Index>{0});
  CHECK(s.biclusters[0].pattern == std::vector<double>{5});
}

TEST_CASE("miner equals the brute-force oracle on random 8x8 matrices") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_matrix(rng, 8, 8, 0.5);
    for (int min_cols : {1, 2, 3}) {
      const auto got = mine(m, {min_cols, 2});
      const auto want = oracle::brute_force_biclusters(m, min_cols, 2);
      REQUIRE_MESSAGE(got.biclusters == want, "trial " << trial << " minCols " << min_cols);
    }
  }
}

TEST_CASE("output is constant and maximal") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_matrix(rng, 10, 10, 0.7, 3);
    const auto s = mine(m, {2, 2});
    for (const auto& b : s.biclusters) {
      REQUIRE(is_constant(b, m));
      CHECK(b.items.size() >= 2);
      CHECK(b.users.size() >= 2);
      for (Index u = 0; u < m.n_users(); ++u) {
        if (std::binary_search(b.users.begin(), b.users.end(), u)) continue;
        Bicluster bigger = b;
        bigger.users.insert(std::lower_bound(bigger.users.begin(), bigger.users.end(), u), u);
        CHECK_FALSE(is_constant(bigger, m));
      }
      const auto [items, pattern] = oracle::agreement(m, b.users);
      CHECK(items == b.items);
      CHECK(pattern == b.pattern);
    }
  }
}

TEST_CASE("mining is deterministic and thread independent") {
  std::mt19937_64 rng(11);
  const auto m = oracle::random_matrix(rng, 60, 40, 0.5, 3);
  MineOptions one, many;
  many.threads = 8;
  const auto a = mine(m, {3, 2}, one);
  const auto b = mine(m, {3, 2}, one);
  const auto c = mine(m, {3, 2}, many);
  CHECK(a == b);
  CHECK(a == c);
  MineOptions capped_one, capped_many;
  capped_one.max_output = capped_many.max_output = 50;
  capped_many.threads = 8;
  const auto d = mine(m, {3, 2}, capped_one);
  const auto e = mine(m, {3, 2}, capped_many);
  CHECK(d == e);
  CHECK(d.size() == 50);
  CHECK(d.capped());
  CHECK(d.provenance[0].output_capped);
  CHECK_FALSE(a.capped());
}

TEST_CASE("raising minCols never adds a bicluster") {
  std::mt19937_64 rng(5);
  const auto m = oracle::random_matrix(rng, 30, 20, 0.6, 3);
  std::vector<Bicluster> previous = mine(m, {1, 2}).biclusters;
  for (int c = 2; c <= 6; ++c) {
    const auto current = mine(m, {c, 2}).biclusters;
    for (const auto& b : current)
      CHECK(std::find(previous.begin(), previous.end(), b) != previous.end());
    previous = current;
  }
}

TEST_CASE("aggregate removes duplicates and contained members") {
  BiclusterSet a, b;
  a.biclusters = {{{0, 1}, {0}, {5}}};
  a.provenance = {{{1, 2}}};
  b.biclusters = {{{0, 1}, {0, 1}, {5, 4}}};
  b.provenance = {{{2, 2}}};
  std::vector<BiclusterSet> both{a, b};
  const auto merged = aggregate(std::span<const BiclusterSet>(both));
  REQUIRE(merged.size() == 1);
  CHECK(merged.biclusters[0] == b.biclusters[0]);
  CHECK(merged.provenance.size() == 2);
  std::vector<BiclusterSet> twice{b, b};
  CHECK(aggregate(std::span<const BiclusterSet>(twice)).biclusters == b.biclusters);
}

TEST_CASE("aggregate of one maximal solution is the identity") {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_matrix(rng, 20, 15, 0.6, 3);
  const auto s = mine(m, {2, 2});
  std::vector<BiclusterSet> one{s};
  CHECK(aggregate(std::span<const BiclusterSet>(one)).biclusters == s.biclusters);
}

TEST_CASE("closed fast path agrees with the containment scan") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_matrix(rng, 25, 20, 0.6, 3);
    std::vector<BiclusterSet> closed, general;
    for (int c : {2, 3, 5}) {
      closed.push_back(mine(m, {c, 2}));
      general.push_back(closed.back());
      general.back().closed = false;
    }
    const auto fast = aggregate(std::span<const BiclusterSet>(closed));
    const auto slow = aggregate(std::span<const BiclusterSet>(general));
    CHECK(fast.biclusters == slow.biclusters);
    CHECK(fast.biclusters == mine(m, {2, 2}).biclusters);
  }
}

TEST_CASE("p-value matches the binomial sum oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_matrix(rng, 12, 10, 0.7, 3);
    for (const auto& b : mine(m, {2, 2}).biclusters)
      CHECK(bicluster_p_value(b, m) == doctest::Approx(oracle_p_value(b, m)).epsilon(1e-9));
  }
}

TEST_CASE("significance filter edge cases") {
  std::mt19937_64 rng(17);
  const auto m = oracle::random_matrix(rng, 12, 10, 0.7, 3);
  const auto s = mine(m, {2, 2});
  CHECK(significance_filter(s, m, 1.0).biclusters == s.biclusters);
  CHECK_THROWS_AS(significance_filter(s, m, 0.0), ConfigError);

  const auto flat = from_rows({{4, 4, 2}, {4, 4, 5}, {4, 4, 1}});
  const auto all = mine(flat, {2, 2});
  REQUIRE(all.size() == 1);
  CHECK(bicluster_p_value(all.biclusters[0], flat) == doctest::Approx(1.0));
  CHECK(significance_filter(all, flat, 0.99).empty());
}

// A 4x4 block in uniform noise on 8x8 is only significant at 0.01 when the
// noise rarely repeats the block's values in those columns (about half of
// all draws). Instances with no repeats must keep the block; every instance
// must drop all 2x2 coincidences.
TEST_CASE("planted block survives the significance filter") {
  const int planted[4] = {5, 1, 4, 2};
  const std::vector<Index> block{0, 1, 2, 3};
  int clean = 0, clean_kept = 0, small_mined = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> noise(1, 5);
    std::vector<std::vector<int>> rows(8, std::vector<int>(8));
    bool repeats = false;
    for (int u = 0; u < 8; ++u)
      for (int i = 0; i < 8; ++i) {
        rows[u][i] = (u < 4 && i < 4) ? planted[i] : noise(rng);
        repeats |= u >= 4 && i < 4 && rows[u][i] == planted[i];
      }
    const auto m = from_rows(rows);
    const auto s = mine(m, {2, 2});
    const auto kept = significance_filter(s, m, 0.01);
    bool found = false;
    for (const auto& b : kept.biclusters) {
      const bool covers = std::includes(b.users.begin(), b.users.end(), block.begin(), block.end());
      found |= covers && b.items.size() >= 4;
      REQUIRE_FALSE((b.users.size() == 2 && b.items.size() == 2));
      REQUIRE(oracle_p_value(b, m) <= 0.01 + 1e-12);
    }
    for (const auto& b : s.biclusters) small_mined += b.users.size() == 2 && b.items.size() == 2;
    if (!repeats) {
      ++clean;
      clean_kept += found;
    }
  }
  CHECK(clean >= 10);
  CHECK(clean_kept == clean);
  CHECK(small_mined > 0);
}

TEST_CASE("solution file round-trips byte for byte") {
  std::mt19937_64 rng(23);
  const auto base = oracle::random_matrix(rng, 15, 12, 0.6, 3);
  const auto m = build_matrix(base.to_dataset());
  std::vector<BiclusterSet> parts{mine(m, {3, 2}), mine(m, {5, 2})};
  const auto s = aggregate(std::move(parts));
  std::stringstream first;
  write_biclusters(first, s, m);
  std::stringstream in(first.str());
  const auto back = read_biclusters(in, m);
  CHECK(back.biclusters == s.biclusters);
  CHECK(back.provenance == s.provenance);
  std::stringstream second;
  write_biclusters(second, back, m);
  CHECK(first.str() == second.str());
  std::stringstream junk("usbcf-biclusters 2\n");
  CHECK_THROWS_AS(read_biclusters(junk, m), DataError);
}
