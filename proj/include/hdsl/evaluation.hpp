#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "hdsl/constraint_gen.hpp"
#include "hdsl/similarity_model.hpp"
#include "hdsl/sparse_data.hpp"

namespace hdsl {

// Items sharing one score. Lets callers fold large all-zero populations into
// a single group instead of materialising them.
struct ScoreGroup {
  double score = 0.0;
  double positives = 0.0;
  double negatives = 0.0;
};

// Mann-Whitney AUC with ties counted 1/2. Throws when either class is empty.
double auc_grouped(std::vector<ScoreGroup> groups);

// scores: (item, score) pairs; items in `positives` are the positive class.
double auc(const std::vector<std::pair<std::size_t, double>>& scores,
           const std::set<std::size_t>& positives);

// Fraction of test points misclassified by a majority vote over the k most
// similar training points. Similarity ties go to the lower training index,
// vote ties to the smaller label.
double knn_error(const PointSimilarity& sim, const Dataset& train, const Dataset& test,
                 std::size_t k = 3, std::size_t threads = 1);
double knn_error(const Model& m, const Dataset& train, const Dataset& test, std::size_t k = 3,
                 std::size_t threads = 1);

std::set<FeatureIndex> active_features(const Model& m);
// Off-diagonal nonzero positions (i < j).
std::set<std::pair<FeatureIndex, FeatureIndex>> active_entries(const Model& m);

// Features ranked by the L1 norm of their row of M.
double feature_recovery_auc(const Model& m, const std::set<FeatureIndex>& truth_features);

// Upper-triangle pairs ranked by |M_ij|.
double entry_recovery_auc(const Model& m,
                          const std::set<std::pair<FeatureIndex, FeatureIndex>>& truth_entries);

// Links scored by similarity; y = +1 is the positive class.
double link_auc(const Model& m, const Dataset& samples, const std::vector<SignedLink>& links);

}  // namespace hdsl
