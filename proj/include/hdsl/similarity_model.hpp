#pragma once

#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hdsl/sparse_data.hpp"

namespace hdsl {

enum class Sign : std::uint8_t { Pos = 0, Neg = 1 };

inline double sign_value(Sign s) noexcept { return s == Sign::Pos ? 1.0 : -1.0; }
inline char sign_char(Sign s) noexcept { return s == Sign::Pos ? 'P' : 'N'; }

// One rank-one 4-sparse basis lambda (e_i +/- e_j)(e_i +/- e_j)^T, stored in
// canonical order i < j. Ordering is lexicographic on (i, j, sign), Pos first,
// which is the tie-break used everywhere.
struct BasisId {
  FeatureIndex i = 0;
  FeatureIndex j = 1;
  Sign sign = Sign::Pos;

  static BasisId make(FeatureIndex a, FeatureIndex b, Sign s);

  friend auto operator<=>(const BasisId&, const BasisId&) = default;
  friend bool operator==(const BasisId&, const BasisId&) = default;
};

std::string to_string(const BasisId& b);

struct MatrixEntry {
  FeatureIndex row;
  FeatureIndex col;
  double value;
  friend bool operator==(const MatrixEntry&, const MatrixEntry&) = default;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point of the convex hull of the scaled bases: M = sum_B alpha_B B.
class Model {
 public:
  static constexpr double kWeightSumTol = 1e-9;
  static constexpr double kLoadWeightSumTol = 1e-6;

  Model() = default;
  Model(double lambda, std::size_t dim);

  static Model single(const BasisId& b, double lambda, std::size_t dim);

  double lambda() const noexcept { return lambda_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::map<BasisId, double>& atoms() const noexcept { return atoms_; }
  std::size_t atom_count() const noexcept { return atoms_.size(); }

  // Direct weight access for the solver; validate() afterwards.
  std::map<BasisId, double>& mutable_atoms() noexcept { return atoms_; }
  void set_lambda(double lambda);

  double weight(const BasisId& b) const noexcept;
  double weight_sum() const noexcept;
  std::size_t feature_count() const;

  // Throws ModelError when weights are not a proper convex combination.
  void validate(double sum_tol = kWeightSumTol) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  double lambda_ = 1.0;
  std::size_t dim_ = 0;
  std::map<BasisId, double> atoms_;
};

// <x d^T, B> for a single basis scaled by lambda.
double basis_inner(const SparseVector& x, const SparseVector& diff, const BasisId& b,
                   double lambda);

// Coordinate list of M with duplicate positions summed, sorted by (row, col).
// Entries that cancel exactly are dropped.
std::vector<MatrixEntry> to_sparse_matrix(const Model& m);

// Row-indexed materialization of M for evaluating many bilinear forms.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(const Model& m);
  double operator()(const SparseVector& x, const SparseVector& x2) const;
  std::size_t nnz() const noexcept { return nnz_; }

 private:
  std::size_t dim_;
  std::size_t nnz_ = 0;
  std::map<FeatureIndex, std::vector<std::pair<FeatureIndex, double>>> rows_;
};

double similarity_by_atoms(const Model& m, const SparseVector& x, const SparseVector& x2);
double similarity_by_matrix(const Model& m, const SparseVector& x, const SparseVector& x2);

// x^T M x2; iterates atoms when that is cheaper than nnz(x)*nnz(x2) lookups.
double similarity(const Model& m, const SparseVector& x, const SparseVector& x2);

struct ProjectionColumn {
  FeatureIndex i;
  FeatureIndex j;
  Sign sign;
  double coefficient;  // sqrt(alpha * lambda)
};

// L with M = L L^T; one column per atom.
struct ProjectionMap {
  std::size_t dim = 0;
  std::vector<ProjectionColumn> columns;
};

ProjectionMap factorize(const Model& m);
std::vector<double> project(const ProjectionMap& p, const SparseVector& x);

// Projects every point; the result is sparse with dim == number of columns.
std::vector<SparseVector> project_all(const ProjectionMap& p, const std::vector<SparseVector>& xs);

void serialize_model(const Model& m, std::ostream& out);
std::string serialize_model(const Model& m);
Model deserialize_model(std::istream& in);
Model deserialize_model(const std::string& text);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace hdsl
