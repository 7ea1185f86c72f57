#include "usbcf/miner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <iterator>
#include <mutex>
#include <numeric>

#include "usbcf/parallel.hpp"
#include "usbcf/special.hpp"

namespace usbcf {

std::optional<double> Bicluster::expected(Index item) const {
  auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) return std::nullopt;
  return pattern[static_cast<std::size_t>(it - items.begin())];
}

bool BiclusterSet::capped() const {
  return std::any_of(provenance.begin(), provenance.end(), [](const auto& p) {
    return p.output_capped || p.branching_capped;
  });
}

bool canonical_less(const Bicluster& a, const Bicluster& b) {
  if (a.area() != b.area()) return a.area() > b.area();
  if (a.items != b.items) return a.items < b.items;
  if (a.pattern != b.pattern) return a.pattern < b.pattern;
  return a.users < b.users;
}

void sort_canonical(std::vector<Bicluster>& biclusters) {
  std::sort(biclusters.begin(), biclusters.end(), canonical_less);
}

namespace {

using Symbol = std::int32_t;
using Word = std::uint64_t;

// Users as transactions over (item, value) symbols, symbols ordered by item
// and then value, with the users holding each symbol.
struct SymbolTable {
  std::vector<std::vector<Symbol>> transactions;
  std::vector<std::vector<Index>> holders;
  std::vector<Index> symbol_item;
  std::vector<double> symbol_value;

  explicit SymbolTable(const RatingMatrix& m) {
    std::vector<Symbol> offset(m.n_items() + 1, 0);
    std::vector<std::vector<double>> values(m.n_items());
    for (Index i = 0; i < m.n_items(); ++i) {
      auto v = m.col_values(i);
      values[i].assign(v.begin(), v.end());
      std::sort(values[i].begin(), values[i].end());
      values[i].erase(std::unique(values[i].begin(), values[i].end()), values[i].end());
      offset[i + 1] = offset[i] + static_cast<Symbol>(values[i].size());
      for (double x : values[i]) {
        symbol_item.push_back(i);
        symbol_value.push_back(x);
      }
    }
    transactions.resize(m.n_users());
    holders.resize(symbol_item.size());
    for (Index u = 0; u < m.n_users(); ++u) {
      auto items = m.row_items(u);
      auto vals = m.row_values(u);
      auto& t = transactions[u];
      t.reserve(items.size());
      for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& vs = values[items[k]];
        auto pos = std::lower_bound(vs.begin(), vs.end(), vals[k]) - vs.begin();
        t.push_back(offset[items[k]] + static_cast<Symbol>(pos));
      }
      for (Symbol s : t) holders[s].push_back(u);
    }
  }
};

// Every output has a smallest user, its anchor. For one anchor, each other
// user is reduced to the bitset of the anchor's symbols it agrees with, and
// an output is an intersection of such bitsets. Only users agreeing with the
// anchor on min_cols symbols can take part. Higher users are enumerated as
// closed sets with prefix-preserving extension; a lower user containing the
// current pattern means the pattern (and everything below it) belongs to an
// earlier anchor.
class AnchorSearch {
 public:
  AnchorSearch(const SymbolTable& table, MineSettings settings,
               const MineOptions& options, Index anchor,
               std::vector<std::int32_t>& scratch)
      : table_(table), settings_(settings), options_(options), anchor_(anchor) {
    const auto& tr = table.transactions[anchor];
    words_ = (tr.size() + 63) / 64;
    // Agreement counts with every other user.
    std::fill(scratch.begin(), scratch.end(), 0);
    for (Symbol s : tr)
      for (Index u : table.holders[s]) ++scratch[u];
    for (Index u = 0; u < static_cast<Index>(scratch.size()); ++u) {
      if (u == anchor || scratch[u] < settings.min_cols) continue;
      (u < anchor ? lower_users_ : higher_users_).push_back(u);
    }
    higher_.assign(higher_users_.size() * words_, 0);
    lower_.assign(lower_users_.size() * words_, 0);
    std::fill(scratch.begin(), scratch.end(), -1);
    for (std::size_t k = 0; k < higher_users_.size(); ++k)
      scratch[higher_users_[k]] = static_cast<std::int32_t>(k);
    for (std::size_t k = 0; k < lower_users_.size(); ++k)
      scratch[lower_users_[k]] = -2 - static_cast<std::int32_t>(k);
    for (std::size_t bit = 0; bit < tr.size(); ++bit)
      for (Index u : table.holders[tr[bit]]) {
        const std::int32_t slot = scratch[u];
        if (slot >= 0) set(&higher_[slot * words_], bit);
        else if (slot <= -2) set(&lower_[(-2 - slot) * words_], bit);
      }
  }

  /// Depth-first search below the anchor's own transaction; emits into sink
  /// until it holds `budget` biclusters (0 = unlimited).
  void run(std::vector<Bicluster>& sink, std::size_t budget) {
    budget_ = budget;
    const std::size_t n = table_.transactions[anchor_].size();
    if (n < static_cast<std::size_t>(settings_.min_cols)) return;
    std::vector<Word> x(words_, 0);
    for (std::size_t bit = 0; bit < n; ++bit) set(x.data(), bit);
    std::vector<std::int32_t> support, relevant(higher_users_.size()), lower(lower_users_.size());
    std::iota(relevant.begin(), relevant.end(), 0);
    std::iota(lower.begin(), lower.end(), 0);
    for (std::int32_t p : relevant)
      if (count_and(x.data(), high(p)) == n) support.push_back(p);
    node(x, n, support, -1, relevant, lower, sink);
  }

  bool branching_capped() const { return branching_capped_; }

 private:
  static void set(Word* w, std::size_t bit) { w[bit >> 6] |= Word{1} << (bit & 63); }
  const Word* high(std::int32_t p) const { return &higher_[p * words_]; }
  const Word* low(std::int32_t p) const { return &lower_[p * words_]; }

  std::size_t count_and(const Word* a, const Word* b) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += std::popcount(a[w] & b[w]);
    return c;
  }
  bool subset(const Word* a, const Word* b) const {  // a within b
    for (std::size_t w = 0; w < words_; ++w)
      if (a[w] & ~b[w]) return false;
    return true;
  }
  bool full(const std::vector<Bicluster>& sink) const { return budget_ && sink.size() >= budget_; }

  void node(const std::vector<Word>& x, std::size_t size, const std::vector<std::int32_t>& support,
            std::int32_t core, const std::vector<std::int32_t>& relevant,
            const std::vector<std::int32_t>& lower, std::vector<Bicluster>& sink) {
    if (full(sink)) return;
    const std::size_t min_cols = static_cast<std::size_t>(settings_.min_cols);
    std::vector<std::int32_t> next_lower;
    for (std::int32_t u : lower) {
      const std::size_t c = count_and(x.data(), low(u));
      if (c == size) return;
      if (c >= min_cols) next_lower.push_back(u);
    }
    if (1 + support.size() >= static_cast<std::size_t>(settings_.min_rows)) emit(x, support, sink);

    // Candidates outside the support that keep at least min_cols symbols.
    std::vector<std::int32_t> next;
    {
      std::size_t s = 0;
      for (std::int32_t p : relevant) {
        while (s < support.size() && support[s] < p) ++s;
        if (s < support.size() && support[s] == p) continue;
        if (count_and(x.data(), high(p)) >= min_cols) next.push_back(p);
      }
    }
    std::vector<Word> child(words_);
    std::vector<std::int32_t> child_support;
    std::size_t explored = 0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      const std::int32_t p = next[k];
      if (p < core) continue;
      if (full(sink)) return;
      std::size_t child_size = 0;
      for (std::size_t w = 0; w < words_; ++w) {
        child[w] = x[w] & high(p)[w];
        child_size += std::popcount(child[w]);
      }
      // Prefix-preserving check: no smaller candidate may join the support.
      bool ok = true;
      for (std::size_t j = 0; j < k && ok; ++j)
        if (subset(child.data(), high(next[j]))) ok = false;
      if (!ok) continue;
      child_support.clear();
      std::merge(support.begin(), support.end(), next.begin() + k, next.begin() + k + 1,
                 std::back_inserter(child_support));
      for (std::size_t j = k + 1; j < next.size(); ++j)
        if (subset(child.data(), high(next[j]))) child_support.push_back(next[j]);
      std::inplace_merge(child_support.begin(),
                         child_support.begin() + static_cast<std::ptrdiff_t>(support.size() + 1),
                         child_support.end());
      if (options_.max_branching && explored == options_.max_branching) {
        branching_capped_ = true;
        return;
      }
      ++explored;
      node(child, child_size, child_support, p, next, next_lower, sink);
    }
  }

  void emit(const std::vector<Word>& x, const std::vector<std::int32_t>& support,
            std::vector<Bicluster>& sink) const {
    const auto& tr = table_.transactions[anchor_];
    Bicluster b;
    b.users.reserve(support.size() + 1);
    b.users.push_back(anchor_);
    for (std::int32_t p : support) b.users.push_back(higher_users_[p]);
    for (std::size_t bit = 0; bit < tr.size(); ++bit)
      if (x[bit >> 6] >> (bit & 63) & 1) {
        b.items.push_back(table_.symbol_item[tr[bit]]);
        b.pattern.push_back(table_.symbol_value[tr[bit]]);
      }
    sink.push_back(std::move(b));
  }

  const SymbolTable& table_;
  MineSettings settings_;
  const MineOptions& options_;
  Index anchor_;
  std::size_t words_ = 0;
  std::vector<Index> higher_users_, lower_users_;
  std::vector<Word> higher_, lower_;
  std::size_t budget_ = 0;
  bool branching_capped_ = false;
};

}  // namespace

BiclusterSet mine(const RatingMatrix& matrix, MineSettings settings,
                  const MineOptions& options) {
  if (settings.min_cols < 1) throw ConfigError("minCols must be at least 1");
  if (settings.min_rows < 2) throw ConfigError("minRows must be at least 2");

  const SymbolTable table(matrix);
  MineProvenance prov;
  prov.settings = settings;

  // Anchors run independently; results are concatenated in anchor order, so
  // the capped prefix is the same for any thread count.
  const std::size_t n = static_cast<std::size_t>(matrix.n_users());
  const std::size_t cap = options.max_output;
  std::vector<std::vector<Bicluster>> per_anchor(n);
  std::vector<char> done(n, 0), capped(n, 0);
  std::mutex progress_mutex;
  std::size_t done_prefix = 0, prefix_total = 0;
  std::atomic<std::size_t> cutoff{n};
  parallel_for(n, options.threads, [&](std::size_t a) {
    if (a >= cutoff.load()) return;
    std::size_t budget = 0;
    {
      // Emissions of unfinished earlier anchors are unknown, so the
      // remaining budget here bounds the sequential one from above.
      std::lock_guard lock(progress_mutex);
      if (cap && prefix_total >= cap) return;
      if (cap) budget = cap - prefix_total;
    }
    std::vector<std::int32_t> scratch(n);
    AnchorSearch search(table, settings, options, static_cast<Index>(a), scratch);
    search.run(per_anchor[a], budget);
    std::lock_guard lock(progress_mutex);
    capped[a] = search.branching_capped();
    done[a] = 1;
    while (done_prefix < n && done[done_prefix]) {
      prefix_total += per_anchor[done_prefix].size();
      ++done_prefix;
      if (cap && prefix_total >= cap) {
        cutoff.store(done_prefix);
        break;
      }
    }
  });

  std::vector<Bicluster> found;
  for (std::size_t a = 0; a < n; ++a) {
    if (cap && found.size() >= cap) break;
    prov.branching_capped = prov.branching_capped || capped[a];
    for (auto& bic : per_anchor[a]) {
      if (cap && found.size() >= cap) break;
      found.push_back(std::move(bic));
    }
  }
  prov.output_capped = cap && found.size() >= cap;
  prov.emitted = found.size();
  sort_canonical(found);
  BiclusterSet result;
  result.biclusters = std::move(found);
  result.provenance.push_back(prov);
  result.closed = true;
  return result;
}

namespace {

bool contains(const Bicluster& outer, const Bicluster& inner) {
  return std::includes(outer.users.begin(), outer.users.end(),
                       inner.users.begin(), inner.users.end()) &&
         std::includes(outer.items.begin(), outer.items.end(),
                       inner.items.begin(), inner.items.end());
}

}  // namespace

BiclusterSet aggregate(std::span<const BiclusterSet> solutions) {
  return aggregate(std::vector<BiclusterSet>(solutions.begin(), solutions.end()));
}

BiclusterSet aggregate(std::vector<BiclusterSet>&& solutions) {
  BiclusterSet out;
  std::vector<Bicluster> all;
  for (auto& s : solutions) {
    std::move(s.biclusters.begin(), s.biclusters.end(), std::back_inserter(all));
    s.biclusters.clear();
    s.biclusters.shrink_to_fit();
    for (const auto& p : s.provenance)
      if (std::find(out.provenance.begin(), out.provenance.end(), p) ==
          out.provenance.end())
        out.provenance.push_back(p);
  }
  out.closed = std::all_of(solutions.begin(), solutions.end(),
                           [](const BiclusterSet& s) { return s.closed; });
  sort_canonical(all);
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (out.closed) {
    out.biclusters = std::move(all);
    return out;
  }

  // Inverted item index for the containment filter.
  Index max_item = -1;
  for (const auto& b : all)
    if (!b.items.empty()) max_item = std::max(max_item, b.items.back());
  std::vector<std::vector<std::uint32_t>> by_item(max_item + 1);
  for (std::uint32_t k = 0; k < all.size(); ++k)
    for (Index i : all[k].items) by_item[i].push_back(k);

  std::vector<char> keep(all.size(), 1);
  for (std::uint32_t k = 0; k < all.size(); ++k) {
    const Bicluster& b = all[k];
    if (b.items.empty()) continue;
    Index rarest = b.items.front();
    for (Index i : b.items)
      if (by_item[i].size() < by_item[rarest].size()) rarest = i;
    for (std::uint32_t c : by_item[rarest]) {
      if (c == k) continue;
      const Bicluster& o = all[c];
      if (o.users.size() < b.users.size() || o.items.size() < b.items.size())
        continue;
      if (o.users.size() == b.users.size() && o.items.size() == b.items.size())
        continue;  // equal-shaped distinct biclusters cannot contain each other
      if (contains(o, b)) {
        keep[k] = 0;
        break;
      }
    }
  }
  for (std::size_t k = 0; k < all.size(); ++k)
    if (keep[k]) out.biclusters.push_back(std::move(all[k]));
  return out;
}

double bicluster_p_value(const Bicluster& b, const RatingMatrix& matrix) {
  double q = 1.0;
  const double n = matrix.n_users();
  for (std::size_t j = 0; j < b.items.size(); ++j) {
    const auto vals = matrix.col_values(b.items[j]);
    const auto hits = std::count(vals.begin(), vals.end(), b.pattern[j]);
    q *= static_cast<double>(hits) / n;
  }
  return binomial_upper_tail(matrix.n_users(), static_cast<std::int64_t>(b.users.size()), q);
}

BiclusterSet significance_filter(const BiclusterSet& set,
                                 const RatingMatrix& matrix, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("significance alpha must lie in (0, 1]");
  BiclusterSet out;
  out.provenance = set.provenance;
  out.closed = set.closed;
  for (const auto& b : set.biclusters)
    if (bicluster_p_value(b, matrix) <= alpha) out.biclusters.push_back(b);
  return out;
}

bool is_constant(const Bicluster& b, const RatingMatrix& matrix) {
  if (b.items.size() != b.pattern.size()) return false;
  for (Index u : b.users)
    for (std::size_t j = 0; j < b.items.size(); ++j) {
      auto r = matrix.rating(u, b.items[j]);
      if (!r || *r != b.pattern[j]) return false;
    }
  return true;
}

}  // namespace usbcf
