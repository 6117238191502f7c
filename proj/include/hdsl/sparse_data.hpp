#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hdsl {

using FeatureIndex = std::uint32_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sparse point in R^dim. Indices are strictly increasing and no stored value
// is zero.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::size_t dim) : dim_(dim) {}

  // Builds from (index, value) pairs; pairs must already be sorted by index.
  // Zero values are dropped. Throws std::invalid_argument on order/range
  // violations.
  SparseVector(std::size_t dim, const std::vector<std::pair<FeatureIndex, double>>& entries);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }

  const std::vector<FeatureIndex>& indices() const noexcept { return indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  // O(log nnz) lookup; absent features read as 0.
  double at(FeatureIndex i) const noexcept;

  double squared_norm() const noexcept;

  // Appends an entry; index must exceed the last stored index.
  void push_back(FeatureIndex i, double v);

  void set_dim(std::size_t dim);

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<FeatureIndex> indices_;
  std::vector<double> values_;
};

double dot(const SparseVector& u, const SparseVector& v);

// u - v, with exact cancellations dropped.
SparseVector subtract(const SparseVector& u, const SparseVector& v);

struct Dataset {
  std::size_t dim = 0;
  std::vector<SparseVector> points;
  std::optional<std::vector<int>> labels;

  std::size_t size() const noexcept { return points.size(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  // Checks the shared-dim and label-length invariants.
  void validate() const;
};

struct TripletConstraint {
  std::size_t a = 0;  // anchor
  std::size_t b = 0;  // should be more similar to a
  std::size_t c = 0;  // than this one

  friend bool operator==(const TripletConstraint&, const TripletConstraint&) = default;
};

// LIBSVM text: "<label> <idx>:<val> ..." with 1-based indices. When `dim` is
// given it overrides the inferred dimension and must cover every index.
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim = std::nullopt);
Dataset parse_libsvm_string(const std::string& text,
                            std::optional<std::size_t> dim = std::nullopt);
Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim = std::nullopt);

// Unlabeled datasets are written with label 0. Values use 17 significant
// digits so a re-parse is exact.
void serialize_libsvm(const Dataset& ds, std::ostream& out);
void save_libsvm(const Dataset& ds, const std::string& path);

// Per-feature max absolute value; features never seen are absent (scale 1).
class FeatureScaling {
 public:
  static FeatureScaling fit(const Dataset& ds);
  Dataset apply(const Dataset& ds) const;
  SparseVector apply(const SparseVector& x) const;
  double scale(FeatureIndex f) const noexcept;

 private:
  std::vector<double> max_abs_;
};

// Divides each feature by its max absolute value over `ds`.
Dataset scale_to_unit_range(const Dataset& ds);

std::vector<TripletConstraint> parse_triplets(std::istream& in);
std::vector<TripletConstraint> load_triplets(const std::string& path);
void serialize_triplets(const std::vector<TripletConstraint>& triplets, std::ostream& out);
void save_triplets(const std::vector<TripletConstraint>& triplets, const std::string& path);

}  // namespace hdsl
