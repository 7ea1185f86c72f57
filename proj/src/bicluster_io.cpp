#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "text_util.hpp"
#include "usbcf/miner.hpp"

namespace usbcf {

void write_biclusters(std::ostream& out, const BiclusterSet& set,
                      const RatingMatrix& matrix) {
  out << "usbcf-biclusters 1\n";
  out << "settings " << set.provenance.size() << '\n';
  for (const auto& p : set.provenance)
    out << "minCols=" << p.settings.min_cols << " minRows=" << p.settings.min_rows
        << " emitted=" << p.emitted << " output_capped=" << p.output_capped
        << " branching_capped=" << p.branching_capped << '\n';
  out << "count " << set.biclusters.size() << '\n';
  for (const auto& b : set.biclusters) {
    out << b.users.size() << ' ' << b.items.size() << '\t';
    for (std::size_t k = 0; k < b.users.size(); ++k)
      out << (k ? " " : "") << matrix.user_id(b.users[k]);
    out << '\t';
    for (std::size_t k = 0; k < b.items.size(); ++k)
      out << (k ? " " : "") << matrix.item_id(b.items[k]) << ':'
          << detail::format_double(b.pattern[k]);
    out << '\n';
  }
}

namespace {

std::size_t expect_count(const std::string& line, const std::string& tag,
                         std::size_t line_no) {
  std::istringstream ss(line);
  std::string t;
  long long n = -1;
  if (!(ss >> t >> n) || t != tag || n < 0)
    throw DataError("expected '" + tag + " <n>'", line_no);
  return static_cast<std::size_t>(n);
}

long long field_value(std::string_view token, std::string_view key,
                      std::size_t line_no) {
  if (token.substr(0, key.size()) != key || token.size() <= key.size() ||
      token[key.size()] != '=')
    throw DataError("expected field '" + std::string(key) + "='", line_no);
  auto v = detail::parse_int(token.substr(key.size() + 1));
  if (!v) throw DataError("bad value for '" + std::string(key) + "'", line_no);
  return *v;
}

}  // namespace

BiclusterSet read_biclusters(std::istream& in, const RatingMatrix& matrix) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "usbcf-biclusters 1")
    throw DataError("not a usbcf-biclusters v1 file", 1);

  BiclusterSet set;
  ++line_no;
  if (!std::getline(in, line)) throw DataError("missing settings line", line_no);
  const std::size_t n_settings = expect_count(line, "settings", line_no);
  for (std::size_t s = 0; s < n_settings; ++s) {
    ++line_no;
    if (!std::getline(in, line)) throw DataError("truncated settings", line_no);
    const auto tok = detail::split(line, ' ');
    if (tok.size() != 5) throw DataError("expected 5 setting fields", line_no);
    MineProvenance p;
    p.settings.min_cols = static_cast<int>(field_value(tok[0], "minCols", line_no));
    p.settings.min_rows = static_cast<int>(field_value(tok[1], "minRows", line_no));
    p.emitted = static_cast<std::size_t>(field_value(tok[2], "emitted", line_no));
    p.output_capped = field_value(tok[3], "output_capped", line_no) != 0;
    p.branching_capped = field_value(tok[4], "branching_capped", line_no) != 0;
    set.provenance.push_back(p);
  }
  ++line_no;
  if (!std::getline(in, line)) throw DataError("missing count line", line_no);
  const std::size_t count = expect_count(line, "count", line_no);
  set.biclusters.reserve(count);

  for (std::size_t k = 0; k < count; ++k) {
    ++line_no;
    if (!std::getline(in, line)) throw DataError("truncated bicluster list", line_no);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = detail::split(line, '\t');
    if (parts.size() != 3) throw DataError("expected 3 tab-separated parts", line_no);
    const auto shape = detail::split(parts[0], ' ');
    if (shape.size() != 2) throw DataError("bad shape field", line_no);
    const auto n_users = detail::parse_int(shape[0]);
    const auto n_items = detail::parse_int(shape[1]);
    if (!n_users || !n_items) throw DataError("bad shape field", line_no);

    Bicluster b;
    for (auto tok : detail::split(parts[1], ' ')) {
      auto id = detail::parse_int(tok);
      if (!id) throw DataError("bad user id", line_no);
      auto u = matrix.find_user(*id);
      if (!u) throw DataError("unknown user id " + std::to_string(*id), line_no);
      b.users.push_back(*u);
    }
    std::vector<std::pair<Index, double>> cells;
    for (auto tok : detail::split(parts[2], ' ')) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw DataError("bad item:value", line_no);
      auto id = detail::parse_int(tok.substr(0, colon));
      auto v = detail::parse_double(tok.substr(colon + 1));
      if (!id || !v) throw DataError("bad item:value", line_no);
      auto i = matrix.find_item(*id);
      if (!i) throw DataError("unknown item id " + std::to_string(*id), line_no);
      cells.emplace_back(*i, *v);
    }
    if (b.users.size() != static_cast<std::size_t>(*n_users) ||
        cells.size() != static_cast<std::size_t>(*n_items))
      throw DataError("shape does not match listed ids", line_no);
    std::sort(b.users.begin(), b.users.end());
    std::sort(cells.begin(), cells.end());
    if (std::adjacent_find(b.users.begin(), b.users.end()) != b.users.end())
      throw DataError("repeated user id", line_no);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c && cells[c].first == cells[c - 1].first)
        throw DataError("repeated item id", line_no);
      b.items.push_back(cells[c].first);
      b.pattern.push_back(cells[c].second);
    }
    set.biclusters.push_back(std::move(b));
  }
  return set;
}

}  // namespace usbcf
