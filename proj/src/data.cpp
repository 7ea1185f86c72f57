#include "usbcf/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "text_util.hpp"

namespace usbcf {

namespace {

struct KeyHash {
  std::size_t operator()(const std::pair<EntityId, EntityId>& k) const {
    return std::hash<EntityId>{}(k.first) * 1000003u ^
           std::hash<EntityId>{}(k.second);
  }
};

Rating parse_record(std::string_view line, std::size_t line_no) {
  std::string_view fields[4];
  std::size_t n = 0;
  std::size_t start = 0;
  for (std::size_t pos = 0; pos <= line.size(); ++pos) {
    if (pos == line.size() || line[pos] == '\t') {
      if (n == 4) throw DataError("expected 4 tab-separated fields", line_no);
      fields[n++] = line.substr(start, pos - start);
      start = pos + 1;
    }
  }
  if (n != 4) throw DataError("expected 4 tab-separated fields", line_no);

  Rating r{};
  const auto user = detail::parse_int(fields[0]);
  const auto item = detail::parse_int(fields[1]);
  const auto value = detail::parse_double(fields[2]);
  const auto stamp = detail::parse_int(fields[3]);
  if (!user) throw DataError("bad user id '" + std::string(fields[0]) + "'", line_no);
  if (!item) throw DataError("bad item id '" + std::string(fields[1]) + "'", line_no);
  if (!value) throw DataError("bad rating '" + std::string(fields[2]) + "'", line_no);
  if (!stamp) throw DataError("bad timestamp '" + std::string(fields[3]) + "'", line_no);
  r.user = *user;
  r.item = *item;
  r.value = *value;
  return r;
}

}  // namespace

RatingDataset parse_ratings(std::string_view text, RatingScale scale) {
  RatingDataset data;
  data.scale = scale;
  std::unordered_set<std::pair<EntityId, EntityId>, KeyHash> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    Rating r = parse_record(line, line_no);
    if (!scale.contains(r.value))
      throw DataError("rating " + detail::format_double(r.value) +
                          " outside scale [" + detail::format_double(scale.min) +
                          ", " + detail::format_double(scale.max) + "]",
                      line_no);
    if (!seen.insert({r.user, r.item}).second)
      throw DataError("duplicate (user, item) pair (" + std::to_string(r.user) +
                          ", " + std::to_string(r.item) + ")",
                      line_no);
    data.triples.push_back(r);
  }
  return data;
}

RatingDataset parse_ratings(std::istream& in, RatingScale scale) {
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading rating stream");
  return parse_ratings(std::string_view(text), scale);
}

RatingDataset load_ratings(const std::filesystem::path& path,
                           RatingScale scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open rating file " + path.string());
  return parse_ratings(in, scale);
}

void validate(const RatingDataset& data) {
  std::unordered_set<std::pair<EntityId, EntityId>, KeyHash> seen;
  for (std::size_t k = 0; k < data.triples.size(); ++k) {
    const Rating& r = data.triples[k];
    if (!data.scale.contains(r.value))
      throw DataError("rating outside scale", k + 1);
    if (!seen.insert({r.user, r.item}).second)
      throw DataError("duplicate (user, item) pair", k + 1);
  }
}

void write_dataset(std::ostream& out, const RatingDataset& data) {
  out << "usbcf-ratings 1\n";
  out << "scale " << detail::format_double(data.scale.min) << ' '
      << detail::format_double(data.scale.max) << '\n';
  out << "count " << data.triples.size() << '\n';
  for (const Rating& r : data.triples)
    out << r.user << '\t' << r.item << '\t' << detail::format_double(r.value)
        << '\n';
}

RatingDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "usbcf-ratings 1")
    throw DataError("not a usbcf-ratings v1 file", 1);
  RatingDataset data;
  std::string tag;
  if (!std::getline(in, line)) throw DataError("missing scale line", 2);
  {
    std::istringstream ss(line);
    if (!(ss >> tag >> data.scale.min >> data.scale.max) || tag != "scale")
      throw DataError("bad scale line", 2);
  }
  std::size_t count = 0;
  if (!std::getline(in, line)) throw DataError("missing count line", 3);
  {
    std::istringstream ss(line);
    if (!(ss >> tag >> count) || tag != "count")
      throw DataError("bad count line", 3);
  }
  data.triples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw DataError("truncated ratings", 4 + k);
    Rating r{};
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3) throw DataError("expected 3 fields", 4 + k);
    const auto u = detail::parse_int(fields[0]);
    const auto i = detail::parse_int(fields[1]);
    const auto v = detail::parse_double(fields[2]);
    if (!u || !i || !v) throw DataError("bad record", 4 + k);
    r.user = *u;
    r.item = *i;
    r.value = *v;
    data.triples.push_back(r);
  }
  validate(data);
  return data;
}

RatingMatrix::RatingMatrix(std::vector<EntityId> user_ids,
                           std::vector<EntityId> item_ids,
                           const std::vector<Cell>& cells, RatingScale scale)
    : user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)),
      scale_(scale) {
  for (Index u = 0; u < n_users(); ++u) user_index_.emplace(user_ids_[u], u);
  for (Index i = 0; i < n_items(); ++i) item_index_.emplace(item_ids_[i], i);

  std::vector<Eigen::Triplet<double, Index>> triplets;
  triplets.reserve(cells.size());
  for (const Cell& c : cells) triplets.emplace_back(c.user, c.item, c.value);
  rows_.resize(n_users(), n_items());
  rows_.setFromTriplets(triplets.begin(), triplets.end());
  rows_.makeCompressed();
  cols_ = rows_;
  cols_.makeCompressed();

  user_means_ = Eigen::VectorXd::Zero(n_users());
  item_means_ = Eigen::VectorXd::Zero(n_items());
  double total = 0.0;
  for (Index u = 0; u < n_users(); ++u) {
    double sum = 0.0;
    for (double v : row_values(u)) sum += v;
    total += sum;
    if (!row_items(u).empty()) user_means_[u] = sum / row_items(u).size();
  }
  for (Index i = 0; i < n_items(); ++i) {
    double sum = 0.0;
    for (double v : col_values(i)) sum += v;
    if (!col_users(i).empty()) item_means_[i] = sum / col_users(i).size();
  }
  global_mean_ = nnz() ? total / nnz() : 0.0;
}

double RatingMatrix::sparsity() const {
  const double cells = static_cast<double>(n_users()) * n_items();
  return cells > 0 ? 1.0 - static_cast<double>(nnz()) / cells : 1.0;
}

std::optional<Index> RatingMatrix::find_user(EntityId id) const {
  auto it = user_index_.find(id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> RatingMatrix::find_item(EntityId id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> RatingMatrix::rating(Index u, Index i) const {
  const auto items = row_items(u);
  auto it = std::lower_bound(items.begin(), items.end(), i);
  if (it == items.end() || *it != i) return std::nullopt;
  return row_values(u)[static_cast<std::size_t>(it - items.begin())];
}

RatingDataset RatingMatrix::to_dataset() const {
  RatingDataset data;
  data.scale = scale_;
  data.triples.reserve(nnz());
  for (Index u = 0; u < n_users(); ++u) {
    const auto items = row_items(u);
    const auto values = row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k)
      data.triples.push_back({user_ids_[u], item_ids_[items[k]], values[k]});
  }
  return data;
}

RatingMatrix build_matrix(const RatingDataset& data) {
  if (data.empty()) throw ConfigError("cannot build a matrix from an empty dataset");
  std::unordered_map<EntityId, Index> users, items;
  std::vector<EntityId> user_ids, item_ids;
  std::vector<Cell> cells;
  cells.reserve(data.size());
  for (const Rating& r : data.triples) {
    auto [uit, unew] = users.try_emplace(r.user, static_cast<Index>(user_ids.size()));
    if (unew) user_ids.push_back(r.user);
    auto [iit, inew] = items.try_emplace(r.item, static_cast<Index>(item_ids.size()));
    if (inew) item_ids.push_back(r.item);
    cells.push_back({uit->second, iit->second, r.value});
  }
  return RatingMatrix(std::move(user_ids), std::move(item_ids), cells, data.scale);
}

}  // namespace usbcf
