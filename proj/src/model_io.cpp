#include "usbcf/model_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "usbcf/bias.hpp"
#include "usbcf/cocluster.hpp"
#include "usbcf/hybrid.hpp"
#include "usbcf/knn.hpp"
#include "usbcf/usbcf_model.hpp"

namespace usbcf {

namespace {

constexpr char kMagic[8] = {'U', 'S', 'B', 'C', 'F', 'M', 'D', 'L'};

// Little-endian fixed-width fields; doubles are stored as raw IEEE-754 bits.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename Vec>
  void ints(const Vec& v) {
    u64(v.size());
    for (auto x : v) i64(x);
  }
  void doubles(const Eigen::Ref<const Eigen::VectorXd>& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) f64(v[k]);
  }
  void dense(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated model file");
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::size_t count(std::size_t limit = std::size_t{1} << 34) {
    const std::uint64_t n = u64();
    if (n > limit) throw DataError("implausible length in model file");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::string s(count(1 << 20), '\0');
    if (!in_.read(s.data(), static_cast<std::streamsize>(s.size())))
      throw DataError("truncated model file");
    return s;
  }
  template <typename T>
  std::vector<T> ints() {
    std::vector<T> v(count());
    for (auto& x : v) x = static_cast<T>(i64());
    return v;
  }
  Eigen::VectorXd doubles() {
    Eigen::VectorXd v(static_cast<Eigen::Index>(count()));
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = f64();
    return v;
  }
  Eigen::MatrixXd dense() {
    const auto rows = static_cast<Eigen::Index>(count()), cols = static_cast<Eigen::Index>(count());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = f64();
    return m;
  }

 private:
  std::istream& in_;
};

using MatrixPtr = std::shared_ptr<const RatingMatrix>;

MatrixPtr matrix_of(const Predictor& p) {
  if (auto* b = dynamic_cast<const BiasModel*>(&p)) return b->matrix();
  if (auto* k = dynamic_cast<const KnnModel*>(&p)) return k->view().base_ptr();
  if (auto* c = dynamic_cast<const CoclusterModel*>(&p)) return c->matrix;
  if (auto* u = dynamic_cast<const UsbcfModel*>(&p)) return u->matrix();
  throw ConfigError("model kind cannot be saved: " + p.name());
}

void collect_matrices(const Predictor& p, std::vector<MatrixPtr>& out) {
  if (auto* h = dynamic_cast<const HybridModel*>(&p)) {
    for (const auto& m : h->chain()) collect_matrices(*m, out);
    return;
  }
  const MatrixPtr m = matrix_of(p);
  for (const auto& seen : out)
    if (seen == m) return;
  out.push_back(m);
}

std::uint64_t matrix_slot(const std::vector<MatrixPtr>& all, const MatrixPtr& m) {
  for (std::size_t k = 0; k < all.size(); ++k)
    if (all[k] == m) return k;
  throw Error("model matrix missing from the table");
}

void write_matrix(Writer& w, const RatingMatrix& m) {
  w.f64(m.scale().min);
  w.f64(m.scale().max);
  w.ints(m.user_ids());
  w.ints(m.item_ids());
  w.u64(m.nnz());
  for (Index u = 0; u < m.n_users(); ++u) {
    const auto items = m.row_items(u);
    const auto values = m.row_values(u);
    for (std::size_t k = 0; k < items.size(); ++k) {
      w.i64(u);
      w.i64(items[k]);
      w.f64(values[k]);
    }
  }
}

MatrixPtr read_matrix(Reader& r) {
  RatingScale scale;
  scale.min = r.f64();
  scale.max = r.f64();
  auto users = r.ints<EntityId>();
  auto items = r.ints<EntityId>();
  std::vector<Cell> cells(r.count());
  for (auto& c : cells) {
    c.user = static_cast<Index>(r.i64());
    c.item = static_cast<Index>(r.i64());
    c.value = r.f64();
    if (c.user < 0 || c.user >= static_cast<Index>(users.size()) || c.item < 0 ||
        c.item >= static_cast<Index>(items.size()))
      throw DataError("model file cell outside the matrix");
  }
  return std::make_shared<const RatingMatrix>(std::move(users), std::move(items), cells, scale);
}

void write_knn_options(Writer& w, const KnnOptions& o) {
  w.u64(o.mode == KnnMode::User ? 0 : 1);
  w.i64(o.k);
  w.u64(o.centering == Centering::ItemMeans ? 0 : 1);
  w.i64(o.min_support);
}

KnnOptions read_knn_options(Reader& r) {
  KnnOptions o;
  o.mode = r.u64() == 0 ? KnnMode::User : KnnMode::Item;
  o.k = static_cast<int>(r.i64());
  o.centering = r.u64() == 0 ? Centering::ItemMeans : Centering::UserMeans;
  o.min_support = static_cast<int>(r.i64());
  o.precompute = false;
  return o;
}

void write_block(Writer& w, const Predictor& p, const std::vector<MatrixPtr>& matrices) {
  if (auto* h = dynamic_cast<const HybridModel*>(&p)) {
    w.str("hybrid");
    w.u64(h->chain().size());
    for (const auto& m : h->chain()) write_block(w, *m, matrices);
    return;
  }
  w.str(p.name());
  w.u64(matrix_slot(matrices, matrix_of(p)));
  if (auto* b = dynamic_cast<const BiasModel*>(&p)) {
    w.f64(b->mu());
    w.f64(b->lambda_item());
    w.f64(b->lambda_user());
    w.doubles(b->user_bias());
    w.doubles(b->item_bias());
  } else if (auto* k = dynamic_cast<const KnnModel*>(&p)) {
    if (!k->view().is_full()) throw ConfigError("only full-matrix KNN models can be saved");
    write_knn_options(w, k->options());
    w.u64(k->has_dense_similarity() ? 1 : 0);
    if (k->has_dense_similarity()) w.dense(k->dense_similarity());
  } else if (auto* c = dynamic_cast<const CoclusterModel*>(&p)) {
    w.i64(c->options.row_clusters);
    w.i64(c->options.col_clusters);
    w.i64(c->options.max_iters);
    w.u64(c->options.seed);
    w.ints(c->row_assign);
    w.ints(c->col_assign);
    w.dense(c->cocluster_avg);
    w.doubles(c->row_avg);
    w.doubles(c->col_avg);
    w.doubles(Eigen::Map<const Eigen::VectorXd>(c->objective_trace.data(),
                                                static_cast<Eigen::Index>(c->objective_trace.size())));
    w.i64(c->iterations);
    w.u64(c->converged ? 1 : 0);
  } else if (auto* u = dynamic_cast<const UsbcfModel*>(&p)) {
    const UsbcfOptions& o = u->options();
    w.f64(o.min_sim);
    w.u64(o.nnbics);
    w.i64(o.inner_k);
    w.u64(o.centering == Centering::ItemMeans ? 0 : 1);
    w.u64(u->user_models().size());
    for (const auto& um : u->user_models()) {
      w.u64(um.member_count);
      w.ints(um.neighborhood.merged_users);
      w.ints(um.neighborhood.merged_items);
      w.u64(um.neighborhood.members.size());
      for (const auto& m : um.neighborhood.members) {
        w.u64(m.id);
        w.f64(m.match);
        w.f64(m.fit);
        w.f64(m.score);
      }
    }
  }
}

std::shared_ptr<const Predictor> read_block(Reader& r, const std::vector<MatrixPtr>& matrices,
                                            int depth) {
  const std::string kind = r.str();
  if (kind == "hybrid") {
    if (depth > 8) throw DataError("model file nests too deeply");
    std::vector<std::shared_ptr<const Predictor>> chain(r.count(1024));
    for (auto& m : chain) m = read_block(r, matrices, depth + 1);
    return std::make_shared<const HybridModel>(std::move(chain));
  }
  const std::uint64_t slot = r.u64();
  if (slot >= matrices.size()) throw DataError("model block refers to a missing matrix");
  const MatrixPtr m = matrices[slot];
  if (kind == "bias") {
    const double mu = r.f64(), li = r.f64(), lu = r.f64();
    Eigen::VectorXd bu = r.doubles(), bi = r.doubles();
    if (bu.size() != m->n_users() || bi.size() != m->n_items())
      throw DataError("bias vectors do not match the matrix");
    return std::make_shared<const BiasModel>(m, mu, std::move(bu), std::move(bi), li, lu);
  }
  if (kind == "ubcf" || kind == "ibcf") {
    auto model = std::make_shared<KnnModel>(RatingView(m), read_knn_options(r));
    if (r.u64()) model->set_dense_similarity(r.dense());
    return model;
  }
  if (kind == "cocluster") {
    auto c = std::make_shared<CoclusterModel>();
    c->matrix = m;
    c->options.row_clusters = static_cast<Index>(r.i64());
    c->options.col_clusters = static_cast<Index>(r.i64());
    c->options.max_iters = static_cast<int>(r.i64());
    c->options.seed = r.u64();
    c->row_assign = r.ints<Index>();
    c->col_assign = r.ints<Index>();
    c->cocluster_avg = r.dense();
    c->row_avg = r.doubles();
    c->col_avg = r.doubles();
    const Eigen::VectorXd trace = r.doubles();
    c->objective_trace.assign(trace.data(), trace.data() + trace.size());
    c->iterations = static_cast<int>(r.i64());
    c->converged = r.u64() != 0;
    const auto rows = c->cocluster_avg.rows(), cols = c->cocluster_avg.cols();
    if (static_cast<Index>(c->row_assign.size()) != m->n_users() ||
        static_cast<Index>(c->col_assign.size()) != m->n_items() || c->row_avg.size() != rows ||
        c->col_avg.size() != cols)
      throw DataError("cocluster block does not match the matrix");
    for (Index g : c->row_assign)
      if (g < 0 || g >= rows) throw DataError("row cluster label out of range");
    for (Index h : c->col_assign)
      if (h < 0 || h >= cols) throw DataError("column cluster label out of range");
    return c;
  }
  if (kind == "usbcf" || kind == "bbcf") {
    UsbcfOptions o;
    o.rule = kind == "usbcf" ? NeighborhoodRule::Threshold : NeighborhoodRule::TopK;
    o.min_sim = r.f64();
    o.nnbics = r.u64();
    o.inner_k = static_cast<int>(r.i64());
    o.centering = r.u64() == 0 ? Centering::ItemMeans : Centering::UserMeans;
    const std::size_t n = r.count();
    if (n != static_cast<std::size_t>(m->n_users())) throw DataError("usbcf block does not match the matrix");
    std::vector<UserModel> users(n);
    for (std::size_t u = 0; u < n; ++u) {
      Neighborhood hood;
      hood.active_user = static_cast<Index>(u);
      const std::size_t member_count = r.count();
      hood.merged_users = r.ints<Index>();
      hood.merged_items = r.ints<Index>();
      auto inside = [](const std::vector<Index>& v, Index bound) {
        return std::is_sorted(v.begin(), v.end()) &&
               std::adjacent_find(v.begin(), v.end()) == v.end() &&
               (v.empty() || (v.front() >= 0 && v.back() < bound));
      };
      if (!inside(hood.merged_users, m->n_users()) || !inside(hood.merged_items, m->n_items()))
        throw DataError("personalized index sets are invalid");
      hood.members.resize(r.count());
      for (auto& s : hood.members) {
        s.id = static_cast<std::uint32_t>(r.u64());
        s.match = r.f64();
        s.fit = r.f64();
        s.score = r.f64();
      }
      UsbcfOptions keep = o;
      keep.keep_members = true;
      users[u] = build_user_model(m, std::move(hood), keep);
      users[u].member_count = member_count;
    }
    return std::make_shared<const UsbcfModel>(m, o, std::move(users));
  }
  throw DataError("unknown model kind in file: " + kind);
}

}  // namespace

void save_model(std::ostream& out, const Predictor& model) {
  std::vector<MatrixPtr> matrices;
  collect_matrices(model, matrices);
  out.write(kMagic, sizeof kMagic);
  Writer w(out);
  w.u64(kModelFormatVersion);
  w.u64(matrices.size());
  for (const auto& m : matrices) write_matrix(w, *m);
  write_block(w, model, matrices);
  if (!out) throw IoError("failed writing model");
}

void save_model(const std::filesystem::path& path, const Predictor& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  save_model(out, model);
}

std::shared_ptr<const Predictor> load_model(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("not a model file");
  Reader r(in);
  const std::uint64_t version = r.u64();
  if (version != kModelFormatVersion)
    throw DataError("unsupported model format version " + std::to_string(version));
  std::vector<MatrixPtr> matrices(r.count(64));
  for (auto& m : matrices) m = read_matrix(r);
  return read_block(r, matrices, 0);
}

std::shared_ptr<const Predictor> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace usbcf
