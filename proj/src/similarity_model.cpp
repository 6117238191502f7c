#include "hdsl/similarity_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hdsl/io_error.hpp"

namespace hdsl {

BasisId BasisId::make(FeatureIndex a, FeatureIndex b, Sign s) {
  if (a == b) throw std::invalid_argument("basis requires two distinct features");
  return a < b ? BasisId{a, b, s} : BasisId{b, a, s};
}

std::string to_string(const BasisId& b) {
  return std::string(1, sign_char(b.sign)) + "(" + std::to_string(b.i) + "," +
         std::to_string(b.j) + ")";
}

Model::Model(double lambda, std::size_t dim) : dim_(dim) { set_lambda(lambda); }

Model Model::single(const BasisId& b, double lambda, std::size_t dim) {
  Model m(lambda, dim);
  if (b.j >= dim || b.i >= b.j) throw ModelError("basis " + to_string(b) + " invalid for dim");
  m.atoms_[b] = 1.0;
  return m;
}

void Model::set_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ModelError("lambda must be positive");
  lambda_ = lambda;
}

double Model::weight(const BasisId& b) const noexcept {
  auto it = atoms_.find(b);
  return it == atoms_.end() ? 0.0 : it->second;
}

double Model::weight_sum() const noexcept {
  double s = 0.0;
  for (const auto& [b, a] : atoms_) s += a;
  return s;
}

std::size_t Model::feature_count() const {
  std::set<FeatureIndex> f;
  for (const auto& [b, a] : atoms_) {
    f.insert(b.i);
    f.insert(b.j);
  }
  return f.size();
}

void Model::validate(double sum_tol) const {
  if (atoms_.empty()) throw ModelError("model has no atoms");
  for (const auto& [b, a] : atoms_) {
    if (b.i >= b.j || b.j >= dim_) throw ModelError("atom " + to_string(b) + " out of range");
    if (!(a > 0.0)) throw ModelError("atom " + to_string(b) + " has non-positive weight");
  }
  double s = weight_sum();
  if (std::abs(s - 1.0) > sum_tol)
    throw ModelError("weights sum to " + std::to_string(s) + ", expected 1");
}

double basis_inner(const SparseVector& x, const SparseVector& diff, const BasisId& b,
                   double lambda) {
  const double xi = x.at(b.i), xj = x.at(b.j);
  if (xi == 0.0 && xj == 0.0) return 0.0;
  const double di = diff.at(b.i), dj = diff.at(b.j);
  return lambda * (xi * di + xj * dj + sign_value(b.sign) * (xi * dj + xj * di));
}

std::vector<MatrixEntry> to_sparse_matrix(const Model& m) {
  std::map<std::pair<FeatureIndex, FeatureIndex>, double> acc;
  for (const auto& [b, a] : m.atoms()) {
    const double v = a * m.lambda();
    const double off = sign_value(b.sign) * v;
    acc[{b.i, b.i}] += v;
    acc[{b.j, b.j}] += v;
    acc[{b.i, b.j}] += off;
    acc[{b.j, b.i}] += off;
  }
  std::vector<MatrixEntry> out;
  out.reserve(acc.size());
  for (const auto& [rc, v] : acc)
    if (v != 0.0) out.push_back({rc.first, rc.second, v});
  return out;
}

SimilarityMatrix::SimilarityMatrix(const Model& m) : dim_(m.dim()) {
  for (const auto& e : to_sparse_matrix(m)) {
    rows_[e.row].emplace_back(e.col, e.value);
    ++nnz_;
  }
}

double SimilarityMatrix::operator()(const SparseVector& x, const SparseVector& x2) const {
  if (x.dim() != dim_ || x2.dim() != dim_)
    throw DimensionMismatch("similarity: dimension mismatch");
  double s = 0.0;
  for (std::size_t e = 0; e < x.nnz(); ++e) {
    auto it = rows_.find(x.indices()[e]);
    if (it == rows_.end()) continue;
    double row = 0.0;
    for (const auto& [col, v] : it->second) row += v * x2.at(col);
    s += x.values()[e] * row;
  }
  return s;
}

double similarity_by_atoms(const Model& m, const SparseVector& x, const SparseVector& x2) {
  if (x.dim() != m.dim() || x2.dim() != m.dim())
    throw DimensionMismatch("similarity: dimension mismatch");
  double s = 0.0;
  for (const auto& [b, a] : m.atoms()) {
    const double xi = x.at(b.i), xj = x.at(b.j);
    if (xi == 0.0 && xj == 0.0) continue;
    const double yi = x2.at(b.i), yj = x2.at(b.j);
    s += a * (xi * yi + xj * yj + sign_value(b.sign) * (xi * yj + xj * yi));
  }
  return m.lambda() * s;
}

double similarity_by_matrix(const Model& m, const SparseVector& x, const SparseVector& x2) {
  return SimilarityMatrix(m)(x, x2);
}

double similarity(const Model& m, const SparseVector& x, const SparseVector& x2) {
  if (m.atom_count() < x.nnz() * x2.nnz()) return similarity_by_atoms(m, x, x2);
  return similarity_by_matrix(m, x, x2);
}

ProjectionMap factorize(const Model& m) {
  ProjectionMap p;
  p.dim = m.dim();
  p.columns.reserve(m.atom_count());
  for (const auto& [b, a] : m.atoms())
    p.columns.push_back({b.i, b.j, b.sign, std::sqrt(a * m.lambda())});
  return p;
}

std::vector<double> project(const ProjectionMap& p, const SparseVector& x) {
  if (x.dim() != p.dim) throw DimensionMismatch("project: dimension mismatch");
  std::vector<double> out(p.columns.size(), 0.0);
  for (std::size_t c = 0; c < p.columns.size(); ++c) {
    const auto& col = p.columns[c];
    out[c] = col.coefficient * (x.at(col.i) + sign_value(col.sign) * x.at(col.j));
  }
  return out;
}

std::vector<SparseVector> project_all(const ProjectionMap& p,
                                      const std::vector<SparseVector>& xs) {
  // feature -> (column, signed coefficient)
  std::unordered_map<FeatureIndex, std::vector<std::pair<std::size_t, double>>> touching;
  for (std::size_t c = 0; c < p.columns.size(); ++c) {
    const auto& col = p.columns[c];
    touching[col.i].emplace_back(c, col.coefficient);
    touching[col.j].emplace_back(c, sign_value(col.sign) * col.coefficient);
  }
  std::vector<SparseVector> out;
  out.reserve(xs.size());
  std::vector<double> dense(p.columns.size(), 0.0);
  std::vector<std::size_t> hit;
  for (const auto& x : xs) {
    if (x.dim() != p.dim) throw DimensionMismatch("project: dimension mismatch");
    hit.clear();
    for (std::size_t e = 0; e < x.nnz(); ++e) {
      auto it = touching.find(x.indices()[e]);
      if (it == touching.end()) continue;
      for (const auto& [c, coef] : it->second) {
        if (dense[c] == 0.0) hit.push_back(c);
        dense[c] += coef * x.values()[e];
        if (dense[c] == 0.0) dense[c] = 0.0;  // normalise -0
      }
    }
    std::sort(hit.begin(), hit.end());
    hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
    SparseVector v(p.columns.size());
    for (std::size_t c : hit) {
      v.push_back(static_cast<FeatureIndex>(c), dense[c]);
      dense[c] = 0.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

void serialize_model(const Model& m, std::ostream& out) {
  out << "hdsl-model 1\n";
  out << std::setprecision(17) << "lambda " << m.lambda() << " dim " << m.dim() << '\n';
  for (const auto& [b, a] : m.atoms())
    out << sign_char(b.sign) << ' ' << b.i << ' ' << b.j << ' ' << a << '\n';
}

std::string serialize_model(const Model& m) {
  std::ostringstream os;
  serialize_model(m, os);
  return os.str();
}

Model deserialize_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ModelError("empty model file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != "hdsl-model")
      throw ModelError("not an hdsl-model file");
    if (version != 1) throw ModelError("unsupported model version " + std::to_string(version));
  }
  if (!std::getline(in, line)) throw ModelError("missing lambda/dim line");
  double lambda = 0.0;
  long long dim = -1;
  {
    std::istringstream ls(line);
    std::string k1, k2, rest;
    if (!(ls >> k1 >> lambda >> k2 >> dim) || k1 != "lambda" || k2 != "dim" || dim < 0 ||
        (ls >> rest))
      throw ModelError("malformed lambda/dim line: '" + line + "'");
  }
  Model m(lambda, static_cast<std::size_t>(dim));
  auto& atoms = m.mutable_atoms();
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string s, rest;
    long long i = -1, j = -1;
    double a = 0.0;
    if (!(ls >> s >> i >> j >> a) || (ls >> rest) || (s != "P" && s != "N"))
      throw ModelError("line " + std::to_string(lineno) + ": malformed atom");
    if (i < 0 || j <= i || j >= dim)
      throw ModelError("line " + std::to_string(lineno) + ": atom indices must satisfy 0<=i<j<dim");
    BasisId b{static_cast<FeatureIndex>(i), static_cast<FeatureIndex>(j),
              s == "P" ? Sign::Pos : Sign::Neg};
    if (!(a > 0.0)) throw ModelError("line " + std::to_string(lineno) + ": weight must be > 0");
    if (!atoms.emplace(b, a).second)
      throw ModelError("line " + std::to_string(lineno) + ": duplicate atom " + to_string(b));
  }
  m.validate(Model::kLoadWeightSumTol);
  const double sum = m.weight_sum();
  if (std::abs(sum - 1.0) > 1e-12)
    for (auto& [b, a] : atoms) a /= sum;
  return m;
}

Model deserialize_model(const std::string& text) {
  std::istringstream in(text);
  return deserialize_model(in);
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  serialize_model(m, out);
  if (!out) throw IoError("write failure on " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return deserialize_model(in);
}

}  // namespace hdsl
