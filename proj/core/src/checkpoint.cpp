#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cslot/error.hpp"
#include "cslot/neural.hpp"

// Checkpoint layout (UTF-8 text, one record per line):
//
//   cslot-checkpoint 1
//   embeddings <count>
//   embedding <dim> <entries> <frozen>     then one line per entry
//   lstm forward <rows> <cols>             then one line per row, then bias line
//   lstm backward <rows> <cols>
//   heads <count>
//   head <classes> <features>
//   labels<TAB>l0<TAB>l1...                then one line per class row, then bias line
//   end
//
// Reals are printed with 17 significant digits, enough for an exact
// round trip of IEEE-754 doubles.

namespace cslot {

namespace {

constexpr int kVersion = 1;

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void put_row(std::ostream& out, const auto& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    put(out, values(i));
  }
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream line(const std::string& expect_keyword = {}) {
    std::string text;
    if (!std::getline(in_, text)) throw CheckpointError("unexpected end of checkpoint at line " + std::to_string(no_ + 1));
    ++no_;
    std::istringstream fields(text);
    if (!expect_keyword.empty()) {
      std::string kw;
      fields >> kw;
      if (kw != expect_keyword)
        throw CheckpointError("line " + std::to_string(no_) + ": expected '" + expect_keyword + "', got '" + kw + "'");
    }
    return fields;
  }

  std::string raw() {
    std::string text;
    if (!std::getline(in_, text)) throw CheckpointError("unexpected end of checkpoint");
    ++no_;
    return text;
  }

  template <typename Dest>
  void reals(Dest& dest, Eigen::Index count, auto&& assign) {
    const std::string text = raw();
    const char* p = text.data();
    const char* end = p + text.size();
    for (Eigen::Index i = 0; i < count; ++i) {
      while (p < end && *p == ' ') ++p;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw CheckpointError("line " + std::to_string(no_) + ": bad real");
      assign(dest, i, v);
      p = next;
    }
  }

  std::size_t number(std::istringstream& fields) {
    long long v = -1;
    if (!(fields >> v) || v < 0) throw CheckpointError("line " + std::to_string(no_) + ": bad count");
    return static_cast<std::size_t>(v);
  }

 private:
  std::istream& in_;
  std::size_t no_ = 0;
};

void write_lstm(std::ostream& out, const char* name, const LstmParams& p) {
  out << "lstm " << name << ' ' << p.weights.rows() << ' ' << p.weights.cols() << '\n';
  for (Eigen::Index r = 0; r < p.weights.rows(); ++r) put_row(out, p.weights.row(r));
  put_row(out, p.bias);
}

void read_matrix_rows(Reader& r, Matrix& m) {
  for (Eigen::Index row = 0; row < m.rows(); ++row)
    r.reals(m, m.cols(), [row](Matrix& d, Eigen::Index i, double v) { d(row, i) = v; });
}

void read_vector(Reader& r, Vector& v) {
  r.reals(v, v.size(), [](Vector& d, Eigen::Index i, double x) { d(i) = x; });
}

LstmParams read_lstm(Reader& r, const std::string& name) {
  auto fields = r.line("lstm");
  std::string got;
  fields >> got;
  if (got != name) throw CheckpointError("expected lstm '" + name + "'");
  const auto rows = static_cast<Eigen::Index>(r.number(fields));
  const auto cols = static_cast<Eigen::Index>(r.number(fields));
  if (rows % 4 != 0) throw CheckpointError("lstm rows must be a multiple of 4");
  LstmParams p;
  p.weights.resize(rows, cols);
  p.bias.resize(rows);
  read_matrix_rows(r, p.weights);
  read_vector(r, p.bias);
  return p;
}

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  out << "cslot-checkpoint " << kVersion << '\n';
  out << "embeddings " << params.embeddings.size() << '\n';
  for (const auto& e : params.embeddings) {
    out << "embedding " << e.dim() << ' ' << e.entries() << ' ' << e.frozen << '\n';
    for (Eigen::Index c = 0; c < e.table.cols(); ++c) put_row(out, e.table.col(c));
  }
  write_lstm(out, "forward", params.forward);
  write_lstm(out, "backward", params.backward);
  out << "heads " << params.heads.size() << '\n';
  for (const auto& h : params.heads) {
    out << "head " << h.weights.rows() << ' ' << h.weights.cols() << '\n';
    out << "labels";
    for (const auto& l : h.labels) out << '\t' << l;
    out << '\n';
    for (Eigen::Index r = 0; r < h.weights.rows(); ++r) put_row(out, h.weights.row(r));
    put_row(out, h.bias);
  }
  out << "end\n";
}

ModelParams read_checkpoint(std::istream& in) {
  Reader r(in);
  {
    auto header = r.line("cslot-checkpoint");
    int version = 0;
    header >> version;
    if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams p;
  auto ecount = r.line("embeddings");
  const std::size_t n_embed = r.number(ecount);
  for (std::size_t s = 0; s < n_embed; ++s) {
    auto fields = r.line("embedding");
    const auto dim = static_cast<Eigen::Index>(r.number(fields));
    const auto entries = static_cast<Eigen::Index>(r.number(fields));
    EmbeddingTable e;
    e.frozen = r.number(fields);
    e.table.resize(dim, entries);
    for (Eigen::Index c = 0; c < entries; ++c)
      r.reals(e.table, dim, [c](Matrix& d, Eigen::Index i, double v) { d(i, c) = v; });
    p.embeddings.push_back(std::move(e));
  }
  p.forward = read_lstm(r, "forward");
  p.backward = read_lstm(r, "backward");
  auto hcount = r.line("heads");
  const std::size_t n_heads = r.number(hcount);
  for (std::size_t hi = 0; hi < n_heads; ++hi) {
    auto fields = r.line("head");
    const auto rows = static_cast<Eigen::Index>(r.number(fields));
    const auto cols = static_cast<Eigen::Index>(r.number(fields));
    SoftmaxHead h;
    std::istringstream labels(r.raw());
    std::string label;
    std::getline(labels, label, '\t');
    if (label != "labels") throw CheckpointError("expected head labels");
    while (std::getline(labels, label, '\t')) h.labels.push_back(label);
    if (static_cast<Eigen::Index>(h.labels.size()) != rows) throw CheckpointError("label count does not match head rows");
    h.weights.resize(rows, cols);
    h.bias.resize(rows);
    read_matrix_rows(r, h.weights);
    read_vector(r, h.bias);
    p.heads.push_back(std::move(h));
  }
  r.line("end");
  if (p.forward.weights.cols() != static_cast<Eigen::Index>(p.input_dim() + p.hidden()))
    throw CheckpointError("lstm input width does not match embeddings");
  return p;
}

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(params, out);
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace cslot
