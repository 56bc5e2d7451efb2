#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwr/wls.hpp"

namespace cwr {

/// One node of a regression tree. Internal nodes send x[feature] <= threshold
/// to `left`. `reduction` is the drop in squared error achieved by the split
/// (zero for leaves).
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean response of the node's training subset
    double reduction = 0.0;
    Eigen::Index count = 0;

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_one(const Eigen::Ref<const Vector>& x) const;
    Vector predict(const Matrix& X) const;

    double total_reduction() const;
    int depth() const;
    std::size_t leaf_count() const;
};

/// Greedy CART regression tree. Candidate thresholds are midpoints between
/// consecutive distinct values; each split maximizes the squared-error
/// reduction subject to `min_leaf` records per side. Ties go to the lower
/// feature index, then the lower threshold.
RegressionTree fit_tree(const Matrix& X, const Vector& y, int max_depth, int min_leaf);

struct BoostOptions {
    int trees = 100;
    double shrinkage = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
};

/// Least-squares boosting: F_0 = mean(y), then each stage fits a tree to the
/// current residuals and adds shrinkage times its prediction.
struct BoostedEnsemble {
    double initial = 0.0;
    BoostOptions options;
    std::vector<RegressionTree> trees;
    std::vector<double> stage_mse;  // stage_mse[m] is the training MSE after m trees
    std::vector<std::string> feature_names;

    Vector predict(const Matrix& X) const;
};

BoostedEnsemble fit_lsboost(const Matrix& X, const Vector& y, const BoostOptions& options = {},
                            std::vector<std::string> feature_names = {});

/// Per-predictor split-gain totals across an ensemble.
struct ImportanceReport {
    std::vector<std::string> names;
    Vector raw;
    Vector normalized;                 // sums to 1 unless uninformative
    std::vector<Eigen::Index> order;   // predictor indices, most important first
    bool uninformative = false;        // no split anywhere in the ensemble

    /// Columns: predictor, raw_reduction, normalized, rank (1 = most important).
    void write_csv(std::ostream& out) const;
    nlohmann::json to_json() const;
};

ImportanceReport predictor_importance(const BoostedEnsemble& ensemble);

/// Names of the `top_k` most important predictors.
std::vector<std::string> select_factors(const ImportanceReport& report, int top_k);

}  // namespace cwr
