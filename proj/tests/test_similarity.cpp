#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "usbcf/similarity.hpp"

using namespace usbcf;

namespace {

// Items 0..n-1 with explicit values; 0 = unrated.
RatingMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  RatingDataset d;
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (std::size_t i = 0; i < rows[u].size(); ++i)
      if (rows[u][i] > 0) d.triples.push_back({EntityId(u), EntityId(i), double(rows[u][i])});
  return build_matrix(d);
}

Bicluster make(std::vector<Index> users, std::vector<Index> items, std::vector<double> pattern) {
  return {std::move(users), std::move(items), std::move(pattern)};
}

struct Pair {
  std::vector<Index> items;
  std::vector<double> ratings;
  UserProfile profile() const { return {0, items, ratings}; }
};

double match_direct(const Pair& p, const Bicluster& b) {
  int shared = 0;
  for (Index i : b.items) shared += std::binary_search(p.items.begin(), p.items.end(), i);
  return double(shared) / b.items.size();
}

double fit_direct(const Pair& p, const Bicluster& b, RatingScale scale) {
  double sq = 0;
  int shared = 0;
  for (std::size_t j = 0; j < b.items.size(); ++j) {
    auto it = std::lower_bound(p.items.begin(), p.items.end(), b.items[j]);
    if (it == p.items.end() || *it != b.items[j]) continue;
    const double r = p.ratings[it - p.items.begin()];
    sq += (r - b.pattern[j]) * (r - b.pattern[j]);
    ++shared;
  }
  if (!shared) return 0.0;
  return 1.0 - std::sqrt(sq / shared) / scale.span();
}

Pair random_profile(std::mt19937_64& rng, int n_items) {
  Pair p;
  std::bernoulli_distribution keep(0.5);
  std::uniform_int_distribution<int> v(1, 5);
  for (int i = 0; i < n_items; ++i)
    if (keep(rng)) {
      p.items.push_back(i);
      p.ratings.push_back(v(rng));
    }
  return p;
}

Bicluster random_bicluster(std::mt19937_64& rng, int n_items) {
  Bicluster b;
  std::bernoulli_distribution keep(0.3);
  std::uniform_int_distribution<int> v(1, 5);
  for (int i = 0; i < n_items; ++i)
    if (keep(rng)) {
      b.items.push_back(i);
      b.pattern.push_back(v(rng));
    }
  if (b.items.empty()) {
    b.items.push_back(0);
    b.pattern.push_back(3);
  }
  b.users = {1, 2};
  return b;
}

}  // namespace

TEST_CASE("sim_match examples") {
  const Pair p{{1, 2, 3}, {3, 3, 3}};
  CHECK(sim_match(p.profile(), make({}, {2, 3, 4, 5}, {1, 1, 1, 1})) == 0.5);
  CHECK(sim_match(p.profile(), make({}, {7, 8}, {1, 1})) == 0.0);
  CHECK(sim_match(p.profile(), make({}, {1, 3}, {1, 1})) == 1.0);
}

TEST_CASE("sim_fit examples") {
  const RatingScale scale{1, 5};
  CHECK(sim_fit(Pair{{1, 2}, {4, 5}}.profile(), make({}, {1, 2}, {4, 5}), scale) == 1.0);
  CHECK(sim_fit(Pair{{1, 2}, {1, 1}}.profile(), make({}, {1, 2}, {5, 5}), scale) == 0.0);
  const Pair partial{{1, 3}, {3, 3}};
  const Bicluster b = make({}, {1, 2, 3}, {4, 2, 3});
  const double fit = sim_fit(partial.profile(), b, scale);
  CHECK(fit == doctest::Approx(1.0 - std::sqrt(0.5) / 4.0));
  CHECK(fit == doctest::Approx(0.8232).epsilon(1e-4));
  CHECK(user_bicluster_similarity(partial.profile(), b, scale) ==
        doctest::Approx(2.0 / 3.0 * fit));
  CHECK(sim_fit(partial.profile(), make({}, {9}, {1}), scale) == 0.0);
}

TEST_CASE("product examples") {
  const RatingScale scale{1, 5};
  const Pair p{{1, 2, 3}, {4, 2, 3}};
  CHECK(user_bicluster_similarity(p.profile(), make({}, {1, 2, 3}, {4, 2, 3}), scale) == 1.0);
  CHECK(user_bicluster_similarity(p.profile(), make({}, {5, 6}, {4, 4}), scale) == 0.0);
  const Pair half{{1, 3}, {3, 3}};
  const Bicluster b = make({}, {1, 2, 3, 4}, {4, 2, 3, 1});
  CHECK(user_bicluster_similarity(half.profile(), b, scale) ==
        doctest::Approx(0.5 * (1.0 - std::sqrt(0.5) / 4.0)));
  CHECK(user_bicluster_similarity(half.profile(), b, scale) == doctest::Approx(0.4116).epsilon(1e-4));
}

TEST_CASE("similarity against a direct evaluation on random pairs") {
  std::mt19937_64 rng(31);
  const RatingScale scale{1, 5};
  for (int t = 0; t < 2000; ++t) {
    const Pair p = random_profile(rng, 20);
    const Bicluster b = random_bicluster(rng, 20);
    const double m = sim_match(p.profile(), b), f = sim_fit(p.profile(), b, scale);
    CHECK(m == doctest::Approx(match_direct(p, b)));
    CHECK(f == doctest::Approx(fit_direct(p, b, scale)));
    CHECK(user_bicluster_similarity(p.profile(), b, scale) == doctest::Approx(m * f));
  }
}

TEST_CASE("index selection equals direct selection") {
  std::mt19937_64 rng(37);
  const auto m = oracle::random_matrix(rng, 40, 30, 0.5, 3);
  const auto set = mine(m, {2, 2});
  REQUIRE(set.size() > 20);
  const BiclusterIndex index(set, m.n_items());
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto profile = profile_of(m, u);
    for (double min_sim : {0.0, 0.2, 0.5, 1.0}) {
      const auto a = select_neighborhood_usbcf(profile, index, min_sim, m.scale());
      const auto b = select_neighborhood_usbcf(profile, set, min_sim, m.scale());
      std::vector<std::uint32_t> want;
      for (std::uint32_t k = 0; k < set.size(); ++k)
        if (user_bicluster_similarity(profile, set.biclusters[k], m.scale()) >= min_sim)
          want.push_back(k);
      std::vector<std::uint32_t> got;
      for (const auto& s : a.members) got.push_back(s.id);
      std::sort(got.begin(), got.end());
      CHECK(got == want);
      CHECK(a.merged_users == b.merged_users);
      CHECK(a.merged_items == b.merged_items);
      CHECK(std::binary_search(a.merged_users.begin(), a.merged_users.end(), u));
      std::set<Index> users{u}, items;
      for (auto id : want) {
        users.insert(set.biclusters[id].users.begin(), set.biclusters[id].users.end());
        items.insert(set.biclusters[id].items.begin(), set.biclusters[id].items.end());
      }
      CHECK(a.merged_users == std::vector<Index>(users.begin(), users.end()));
      CHECK(a.merged_items == std::vector<Index>(items.begin(), items.end()));
    }
    for (std::size_t n : {std::size_t{1}, std::size_t{5}, std::size_t{1000}}) {
      const auto a = select_neighborhood_bbcf(profile, index, n);
      const auto b = select_neighborhood_bbcf(profile, set, n);
      CHECK(a.merged_items == b.merged_items);
      CHECK(a.members.size() == b.members.size());
    }
  }
}

TEST_CASE("minSim zero selects everything") {
  std::mt19937_64 rng(41);
  const auto m = oracle::random_matrix(rng, 20, 15, 0.6, 3);
  const auto set = mine(m, {2, 2});
  std::set<Index> items;
  for (const auto& b : set.biclusters) items.insert(b.items.begin(), b.items.end());
  const auto hood = select_neighborhood_usbcf(profile_of(m, 0), set, 0.0, m.scale());
  CHECK(hood.members.size() == set.size());
  CHECK(hood.merged_items == std::vector<Index>(items.begin(), items.end()));
}

TEST_CASE("minSim one without an exact match selects nothing") {
  const auto m = from_rows({{5, 5, 1}, {5, 5, 2}, {3, 1, 4}});
  const auto set = mine(m, {2, 2});
  REQUIRE(set.size() == 1);
  const auto u2 = *m.find_user(2);
  const auto hood = select_neighborhood_usbcf(profile_of(m, u2), set, 1.0, m.scale());
  CHECK(hood.members.empty());
  CHECK(hood.merged_users == std::vector<Index>{u2});
  CHECK(hood.merged_items.empty());
  const auto u0 = *m.find_user(0);
  CHECK(select_neighborhood_usbcf(profile_of(m, u0), set, 1.0, m.scale()).members.size() == 1);
}

TEST_CASE("merged sets are the union of member sets") {
  BiclusterSet set;
  set.biclusters = {make({4, 5}, {3, 5}, {1, 1}), make({6, 8}, {4, 6}, {2, 2})};
  Neighborhood hood;
  hood.active_user = 1;
  hood.members = {{0, 1, 1, 1}, {1, 1, 1, 1}};
  merge_members(hood, set);
  CHECK(hood.merged_users == std::vector<Index>{1, 4, 5, 6, 8});
  CHECK(hood.merged_items == std::vector<Index>{3, 4, 5, 6});
}

TEST_CASE("bbcf prefers biclusters with more users") {
  BiclusterSet set;
  std::vector<Index> ten(10), two{0, 1};
  for (Index k = 0; k < 10; ++k) ten[k] = k;
  set.biclusters = {make(two, {0, 1}, {3, 3}), make(ten, {2, 3}, {3, 3})};
  const Pair p{{0, 2}, {3, 3}};
  const auto hood = select_neighborhood_bbcf(p.profile(), set, 1);
  REQUIRE(hood.members.size() == 1);
  CHECK(hood.members[0].id == 1);
  CHECK(hood.members[0].score == doctest::Approx(5.0));
  CHECK(select_neighborhood_bbcf(p.profile(), set, 10).members.size() == 2);
}

TEST_CASE("bbcf selection equals a full-sort oracle") {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<int> users(2, 6);
  for (int t = 0; t < 50; ++t) {
    BiclusterSet set;
    for (int k = 0; k < 20; ++k) {
      Bicluster b = random_bicluster(rng, 12);
      b.users.clear();
      const int n = users(rng);
      for (int u = 0; u < n; ++u) b.users.push_back(u);
      set.biclusters.push_back(b);
    }
    const Pair p = random_profile(rng, 12);
    std::vector<std::tuple<double, std::size_t, std::uint32_t>> order;
    for (std::uint32_t k = 0; k < 20; ++k) {
      const auto& b = set.biclusters[k];
      order.push_back({match_direct(p, b) * b.users.size(), b.users.size(), k});
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    const auto hood = select_neighborhood_bbcf(p.profile(), set, 5);
    REQUIRE(hood.members.size() == 5);
    std::vector<std::uint32_t> got, want;
    for (const auto& s : hood.members) got.push_back(s.id);
    for (int k = 0; k < 5; ++k) want.push_back(std::get<2>(order[k]));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
  }
}

TEST_CASE("bbcf with unbounded nnbics agrees with minSim zero") {
  std::mt19937_64 rng(47);
  const auto m = oracle::random_matrix(rng, 25, 20, 0.5, 3);
  const auto set = mine(m, {2, 2});
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto p = profile_of(m, u);
    const auto a = select_neighborhood_usbcf(p, set, 0.0, m.scale());
    const auto b = select_neighborhood_bbcf(p, set, set.size() + 1);
    CHECK(a.merged_users == b.merged_users);
    CHECK(a.merged_items == b.merged_items);
  }
}

TEST_CASE("personalized matrix holds exactly the original cells") {
  const auto m = from_rows({{5, 5, 0, 0, 2}, {5, 5, 0, 0, 0}, {0, 0, 3, 3, 4}, {1, 0, 3, 3, 0}});
  BiclusterSet set;
  const Index u0 = *m.find_user(0), u1 = *m.find_user(1), u2 = *m.find_user(2), u3 = *m.find_user(3);
  const Index i0 = *m.find_item(0), i1 = *m.find_item(1), i2 = *m.find_item(2), i3 = *m.find_item(3);
  auto sorted = [](std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  set.biclusters = {make(sorted({u0, u1}), sorted({i0, i1}), {5, 5}),
                    make(sorted({u2, u3}), sorted({i2, i3}), {3, 3})};
  Neighborhood hood;
  hood.active_user = u0;
  hood.members = {{0, 1, 1, 1}, {1, 1, 1, 1}};
  merge_members(hood, set);
  const auto pm = build_personalized_matrix(m, hood);
  CHECK(pm.matrix.n_users() == 4);
  CHECK(pm.matrix.n_items() == 4);
  CHECK(pm.matrix.nnz() == 9);  // 8 bicluster cells plus the cross rating (3, 0)
  for (std::size_t a = 0; a < pm.users.size(); ++a)
    for (std::size_t b = 0; b < pm.items.size(); ++b)
      CHECK(pm.matrix.rating(Index(a), Index(b)) == m.rating(pm.users[a], pm.items[b]));

  Neighborhood empty;
  empty.active_user = u0;
  merge_members(empty, set);
  const auto none = build_personalized_matrix(m, empty);
  CHECK(none.users == std::vector<Index>{u0});
  CHECK(none.items.empty());
}

TEST_CASE("neighborhood dump lists members") {
  std::mt19937_64 rng(53);
  const auto m = oracle::random_matrix(rng, 10, 10, 0.6, 3);
  const auto set = mine(m, {2, 2});
  std::vector<Neighborhood> hoods{select_neighborhood_usbcf(profile_of(m, 0), set, 0.0, m.scale())};
  std::ostringstream out;
  write_neighborhoods(out, hoods, m);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + long(hoods[0].members.size()));
}
