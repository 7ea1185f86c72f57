#include <set>
#include <sstream>

#include "doctest.h"
#include "usbcf/data.hpp"

using namespace usbcf;

namespace {

RatingDataset sample(int n) {
  RatingDataset d;
  for (int k = 0; k < n; ++k) d.triples.push_back({k % 7 + 1, k / 7 + 1, double(k % 5 + 1)});
  return d;
}

std::set<std::pair<EntityId, EntityId>> keys(const RatingDataset& d) {
  std::set<std::pair<EntityId, EntityId>> s;
  for (const auto& t : d.triples) s.insert({t.user, t.item});
  return s;
}

}  // namespace

TEST_CASE("parse a single MovieLens line") {
  const auto d = parse_ratings(std::string_view("196\t242\t3\t881250949\n"));
  REQUIRE(d.size() == 1);
  CHECK(d.triples[0] == Rating{196, 242, 3.0});
}

TEST_CASE("empty input gives an empty dataset") {
  CHECK(parse_ratings(std::string_view("")).empty());
}

TEST_CASE("CRLF and a missing final newline are accepted") {
  const auto d = parse_ratings(std::string_view("1\t2\t4\t10\r\n3\t4\t5\t11"));
  REQUIRE(d.size() == 2);
  CHECK(d.triples[1] == Rating{3, 4, 5.0});
}

TEST_CASE("malformed lines report their line number") {
  try {
    parse_ratings(std::string_view("1\t2\t4\t10\n1\t2\n"));
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_ratings(std::string_view("1\t2\tx\t10\n")), DataError);
  CHECK_THROWS_AS(parse_ratings(std::string_view("1\t2\t4\tnow\n")), DataError);
}

TEST_CASE("duplicate keys and out-of-scale values are rejected") {
  CHECK_THROWS_AS(parse_ratings(std::string_view("1\t2\t4\t10\n1\t2\t3\t11\n")), DataError);
  CHECK_THROWS_AS(parse_ratings(std::string_view("1\t2\t6\t10\n")), DataError);
  CHECK_NOTHROW(parse_ratings(std::string_view("1\t2\t9\t10\n"), RatingScale{1, 10}));
}

TEST_CASE("build_matrix arithmetic") {
  RatingDataset d;
  d.triples = {{1, 10, 5}, {1, 20, 3}, {2, 10, 1}};
  const auto m = build_matrix(d);
  CHECK(m.n_users() == 2);
  CHECK(m.n_items() == 2);
  CHECK(m.user_means()[0] == 4.0);
  CHECK(m.user_means()[1] == 1.0);
  CHECK(m.global_mean() == 3.0);
  CHECK(m.sparsity() == doctest::Approx(0.25));

  RatingDataset one;
  one.triples = {{7, 9, 4}};
  const auto s = build_matrix(one);
  CHECK(s.n_users() == 1);
  CHECK(s.global_mean() == 4.0);
  CHECK_THROWS_AS(build_matrix(RatingDataset{}), ConfigError);
}

TEST_CASE("dense indices follow first appearance and rows match columns") {
  RatingDataset d;
  d.triples = {{30, 5, 1}, {10, 7, 2}, {30, 7, 3}, {20, 5, 4}};
  const auto m = build_matrix(d);
  CHECK(m.user_ids() == std::vector<EntityId>{30, 10, 20});
  CHECK(m.item_ids() == std::vector<EntityId>{5, 7});
  std::size_t cells = 0;
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto items = m.row_items(u);
    const auto values = m.row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k) {
      ++cells;
      const auto users = m.col_users(items[k]);
      const auto it = std::find(users.begin(), users.end(), u);
      REQUIRE(it != users.end());
      CHECK(m.col_values(items[k])[it - users.begin()] == values[k]);
    }
  }
  CHECK(cells == m.nnz());
  const auto back = m.to_dataset();
  CHECK(keys(back) == keys(d));
}

TEST_CASE("dataset cache format round-trips") {
  const auto d = sample(40);
  std::stringstream s;
  write_dataset(s, d);
  const auto back = read_dataset(s);
  CHECK(back.triples == d.triples);
  CHECK(back.scale.min == d.scale.min);
  std::stringstream bad("not a cache\n");
  CHECK_THROWS_AS(read_dataset(bad), DataError);
}

TEST_CASE("random folds partition the data and are reproducible") {
  const auto d = sample(100);
  const auto a = split_folds(d, 5, 42);
  const auto b = split_folds(d, 5, 42);
  REQUIRE(a.size() == 5);
  std::set<std::pair<EntityId, EntityId>> all_test;
  for (std::size_t f = 0; f < a.size(); ++f) {
    CHECK(a[f].test.size() == 20);
    CHECK(a[f].train.size() + a[f].test.size() == d.size());
    CHECK(a[f].fold_id == int(f) + 1);
    CHECK(a[f].test.triples == b[f].test.triples);
    const auto tr = keys(a[f].train), te = keys(a[f].test);
    for (const auto& k : te) CHECK(tr.count(k) == 0);
    all_test.insert(te.begin(), te.end());
  }
  CHECK(all_test == keys(d));
  CHECK(split_folds(d, 5, 7)[0].test.triples != a[0].test.triples);
  CHECK_THROWS_AS(split_folds(d, 1, 42), ConfigError);
  CHECK_THROWS_AS(split_folds(sample(3), 5, 42), ConfigError);
}

TEST_CASE("block folds are contiguous and sorted") {
  const auto d = sample(103);
  const auto folds = block_folds(d, 5);
  std::size_t offset = 0;
  for (const auto& f : folds) {
    CHECK(f.train.size() + f.test.size() == d.size());
    auto expect = std::vector<Rating>(d.triples.begin() + offset,
                                      d.triples.begin() + offset + f.test.size());
    std::sort(expect.begin(), expect.end(), [](const Rating& a, const Rating& b) {
      return std::pair(a.user, a.item) < std::pair(b.user, b.item);
    });
    CHECK(f.test.triples == expect);
    offset += f.test.size();
  }
  CHECK(offset == d.size());
}
