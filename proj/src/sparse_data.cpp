#include "hdsl/sparse_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hdsl/io_error.hpp"

namespace hdsl {

SparseVector::SparseVector(std::size_t dim,
                           const std::vector<std::pair<FeatureIndex, double>>& entries)
    : dim_(dim) {
  indices_.reserve(entries.size());
  values_.reserve(entries.size());
  for (const auto& [i, v] : entries) push_back(i, v);
}

double SparseVector::at(FeatureIndex i) const noexcept {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
  if (it == indices_.end() || *it != i) return 0.0;
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

double SparseVector::squared_norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

void SparseVector::push_back(FeatureIndex i, double v) {
  if (i >= dim_) throw std::invalid_argument("feature index out of range");
  if (!indices_.empty() && i <= indices_.back())
    throw std::invalid_argument("feature indices must be strictly increasing");
  if (v == 0.0) return;
  indices_.push_back(i);
  values_.push_back(v);
}

void SparseVector::set_dim(std::size_t dim) {
  if (!indices_.empty() && indices_.back() >= dim)
    throw std::invalid_argument("dimension smaller than stored feature index");
  dim_ = dim;
}

double dot(const SparseVector& u, const SparseVector& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("dot: dimension mismatch");
  const auto& ui = u.indices();
  const auto& vi = v.indices();
  const auto& uv = u.values();
  const auto& vv = v.values();
  double s = 0.0;
  std::size_t p = 0, q = 0;
  while (p < ui.size() && q < vi.size()) {
    if (ui[p] < vi[q]) {
      ++p;
    } else if (vi[q] < ui[p]) {
      ++q;
    } else {
      s += uv[p] * vv[q];
      ++p;
      ++q;
    }
  }
  return s;
}

SparseVector subtract(const SparseVector& u, const SparseVector& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("subtract: dimension mismatch");
  SparseVector out(u.dim());
  const auto& ui = u.indices();
  const auto& vi = v.indices();
  std::size_t p = 0, q = 0;
  while (p < ui.size() || q < vi.size()) {
    if (q == vi.size() || (p < ui.size() && ui[p] < vi[q])) {
      out.push_back(ui[p], u.values()[p]);
      ++p;
    } else if (p == ui.size() || vi[q] < ui[p]) {
      out.push_back(vi[q], -v.values()[q]);
      ++q;
    } else {
      out.push_back(ui[p], u.values()[p] - v.values()[q]);
      ++p;
      ++q;
    }
  }
  return out;
}

void Dataset::validate() const {
  for (const auto& p : points)
    if (p.dim() != dim) throw DimensionMismatch("dataset point has wrong dimension");
  if (labels && labels->size() != points.size())
    throw std::invalid_argument("label count differs from point count");
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

double parse_double(std::string_view tok, std::size_t line, const char* what) {
  // from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
  return v;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim) {
  struct Row {
    int label;
    std::vector<std::pair<FeatureIndex, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;  // 1-based max seen
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view body(line);
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    if (is_blank(body)) continue;

    std::istringstream toks{std::string(body)};
    std::string tok;
    toks >> tok;
    double label = parse_double(tok, lineno, "label");
    if (label != std::floor(label) || std::abs(label) > std::numeric_limits<int>::max())
      throw ParseError(lineno, "label must be an integer: '" + tok + "'");
    Row row{static_cast<int>(label), {}};
    long long prev = 0;
    while (toks >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError(lineno, "expected <index>:<value>, got '" + tok + "'");
      long long idx = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ec != std::errc() || ptr != tok.data() + colon || idx < 1 ||
          idx > static_cast<long long>(std::numeric_limits<FeatureIndex>::max()))
        throw ParseError(lineno, "bad feature index in '" + tok + "'");
      if (idx <= prev) throw ParseError(lineno, "non-increasing feature index " + std::to_string(idx));
      prev = idx;
      double v = parse_double(std::string_view(tok).substr(colon + 1), lineno, "value");
      max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(idx));
      if (v != 0.0) row.entries.emplace_back(static_cast<FeatureIndex>(idx - 1), v);
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read failure while parsing LIBSVM data");

  Dataset ds;
  ds.dim = max_index;
  if (dim) {
    if (*dim < max_index)
      throw ParseError(lineno, "feature index " + std::to_string(max_index) +
                                   " exceeds declared dimension " + std::to_string(*dim));
    ds.dim = *dim;
  }
  ds.points.reserve(rows.size());
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (auto& r : rows) {
    ds.points.emplace_back(ds.dim, r.entries);
    labels.push_back(r.label);
  }
  ds.labels = std::move(labels);
  return ds;
}

Dataset parse_libsvm_string(const std::string& text, std::optional<std::size_t> dim) {
  std::istringstream in(text);
  return parse_libsvm(in, dim);
}

Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_libsvm(in, dim);
}

void serialize_libsvm(const Dataset& ds, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t n = 0; n < ds.points.size(); ++n) {
    out << (ds.labels ? (*ds.labels)[n] : 0);
    const auto& p = ds.points[n];
    for (std::size_t e = 0; e < p.nnz(); ++e)
      out << ' ' << (p.indices()[e] + 1) << ':' << p.values()[e];
    out << '\n';
  }
}

void save_libsvm(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  serialize_libsvm(ds, out);
  if (!out) throw IoError("write failure on " + path);
}

FeatureScaling FeatureScaling::fit(const Dataset& ds) {
  FeatureScaling s;
  s.max_abs_.assign(ds.dim, 0.0);
  for (const auto& p : ds.points)
    for (std::size_t e = 0; e < p.nnz(); ++e) {
      double& m = s.max_abs_[p.indices()[e]];
      m = std::max(m, std::abs(p.values()[e]));
    }
  return s;
}

double FeatureScaling::scale(FeatureIndex f) const noexcept {
  if (f >= max_abs_.size() || max_abs_[f] == 0.0) return 1.0;
  return max_abs_[f];
}

SparseVector FeatureScaling::apply(const SparseVector& x) const {
  SparseVector out(x.dim());
  for (std::size_t e = 0; e < x.nnz(); ++e) {
    FeatureIndex f = x.indices()[e];
    // Values from splits other than the fitting one may exceed the range.
    out.push_back(f, x.values()[e] / scale(f));
  }
  return out;
}

Dataset FeatureScaling::apply(const Dataset& ds) const {
  Dataset out;
  out.dim = ds.dim;
  out.labels = ds.labels;
  out.points.reserve(ds.points.size());
  for (const auto& p : ds.points) out.points.push_back(apply(p));
  return out;
}

Dataset scale_to_unit_range(const Dataset& ds) { return FeatureScaling::fit(ds).apply(ds); }

std::vector<TripletConstraint> parse_triplets(std::istream& in) {
  std::vector<TripletConstraint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (is_blank(line)) continue;
    std::istringstream ls(line);
    long long a = -1, b = -1, c = -1;
    std::string rest;
    if (!(ls >> a >> b >> c) || (ls >> rest) || a < 0 || b < 0 || c < 0)
      throw ParseError(lineno, "expected '<a> <b> <c>' with non-negative indices");
    if (b == c) throw ParseError(lineno, "triplet has b == c");
    out.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                   static_cast<std::size_t>(c)});
  }
  return out;
}

std::vector<TripletConstraint> load_triplets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_triplets(in);
}

void serialize_triplets(const std::vector<TripletConstraint>& triplets, std::ostream& out) {
  for (const auto& t : triplets) out << t.a << ' ' << t.b << ' ' << t.c << '\n';
}

void save_triplets(const std::vector<TripletConstraint>& triplets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  serialize_triplets(triplets, out);
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace hdsl
