#include "cwr/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

#include "cwr/table.hpp"

namespace cwr {

double RegressionTree::predict_one(const Eigen::Ref<const Vector>& x) const {
    if (nodes.empty()) throw ParameterError("empty regression tree");
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(at)];
        at = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

Vector RegressionTree::predict(const Matrix& X) const {
    if (nodes.empty()) throw ParameterError("empty regression tree");
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int at = 0;
        while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(at)];
            at = X(i, n.feature) <= n.threshold ? n.left : n.right;
        }
        out(i) = nodes[static_cast<std::size_t>(at)].value;
    }
    return out;
}

double RegressionTree::total_reduction() const {
    double total = 0.0;
    for (const auto& n : nodes) total += n.reduction;
    return total;
}

int RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.is_leaf()) continue;
        level[static_cast<std::size_t>(n.left)] = level[static_cast<std::size_t>(n.right)] = level[i] + 1;
        deepest = std::max(deepest, level[i] + 1);
    }
    return deepest;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double reduction = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const Vector& y, int max_depth, int min_leaf)
        : X_(X), y_(y), max_depth_(max_depth), min_leaf_(min_leaf) {}

    RegressionTree build() {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(X_.rows()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        grow(idx, 0);
        return std::move(tree_);
    }

private:
    int grow(const std::vector<Eigen::Index>& idx, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (auto i : idx) {
            sum += y_(i);
            lo = std::min(lo, y_(i));
            hi = std::max(hi, y_(i));
        }
        const auto n = static_cast<Eigen::Index>(idx.size());
        const double mean = sum / static_cast<double>(n);
        {
            auto& node = tree_.nodes[static_cast<std::size_t>(id)];
            node.count = n;
            node.value = std::clamp(mean, lo, hi);
        }
        if (depth >= max_depth_ || n < 2 * min_leaf_ || lo == hi) return id;

        const Split best = best_split(idx, mean);
        if (best.feature < 0 || !(best.reduction > 0.0)) return id;

        std::vector<Eigen::Index> left, right;
        for (auto i : idx) (X_(i, best.feature) <= best.threshold ? left : right).push_back(i);
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.reduction = best.reduction;
        node.left = l;
        node.right = r;
        return id;
    }

    Split best_split(const std::vector<Eigen::Index>& idx, double mean) const {
        const auto n = static_cast<Eigen::Index>(idx.size());
        double total = 0.0;
        for (auto i : idx) total += y_(i) - mean;
        Split best;
        std::vector<Eigen::Index> order(idx);
        for (Eigen::Index f = 0; f < X_.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return X_(a, f) < X_(b, f) || (X_(a, f) == X_(b, f) && a < b);
            });
            double left_sum = 0.0;
            for (Eigen::Index k = 1; k < n; ++k) {
                left_sum += y_(order[static_cast<std::size_t>(k - 1)]) - mean;
                if (k < min_leaf_ || n - k < min_leaf_) continue;
                const double a = X_(order[static_cast<std::size_t>(k - 1)], f);
                const double b = X_(order[static_cast<std::size_t>(k)], f);
                if (!(a < b)) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(k) +
                                    right_sum * right_sum / static_cast<double>(n - k) -
                                    total * total / static_cast<double>(n);
                if (gain > best.reduction) {
                    double thr = a + (b - a) / 2.0;
                    if (!(thr < b)) thr = a;
                    best = {static_cast<int>(f), thr, gain};
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    const Vector& y_;
    int max_depth_;
    int min_leaf_;
    RegressionTree tree_;
};

}  // namespace

RegressionTree fit_tree(const Matrix& X, const Vector& y, int max_depth, int min_leaf) {
    if (X.rows() != y.size()) throw DimensionError("tree: X and y differ in length");
    if (max_depth < 0) throw ParameterError("tree: max_depth must be nonnegative");
    if (min_leaf < 1) throw ParameterError("tree: min_leaf must be at least 1");
    if (X.rows() < 2 * static_cast<Eigen::Index>(min_leaf))
        throw ParameterError("tree: need at least 2 * min_leaf = " + std::to_string(2 * min_leaf) + " records, got " +
                             std::to_string(X.rows()));
    if (!X.allFinite() || !y.allFinite()) throw InputError("tree: non-finite inputs");
    return TreeBuilder(X, y, max_depth, min_leaf).build();
}

Vector BoostedEnsemble::predict(const Matrix& X) const {
    Vector f = Vector::Constant(X.rows(), initial);
    for (const auto& t : trees) f += options.shrinkage * t.predict(X);
    return f;
}

BoostedEnsemble fit_lsboost(const Matrix& X, const Vector& y, const BoostOptions& options,
                            std::vector<std::string> feature_names) {
    if (options.trees < 1) throw ParameterError("LSBoost needs at least one tree");
    if (!(options.shrinkage > 0.0 && options.shrinkage <= 1.0))
        throw ParameterError("LSBoost shrinkage must lie in (0, 1]");
    if (X.rows() != y.size()) throw DimensionError("LSBoost: X and y differ in length");
    if (y.size() == 0) throw InputError("LSBoost: empty training set");
    if (feature_names.empty())
        for (Eigen::Index f = 0; f < X.cols(); ++f) feature_names.push_back("x" + std::to_string(f + 1));
    if (static_cast<Eigen::Index>(feature_names.size()) != X.cols())
        throw DimensionError("LSBoost: feature name count does not match X");

    BoostedEnsemble e;
    e.options = options;
    e.feature_names = std::move(feature_names);
    e.initial = y.mean();
    Vector fitted = Vector::Constant(y.size(), e.initial);
    Vector residual = y - fitted;
    e.stage_mse.push_back(residual.squaredNorm() / static_cast<double>(y.size()));
    for (int m = 0; m < options.trees; ++m) {
        e.trees.push_back(fit_tree(X, residual, options.max_depth, options.min_leaf));
        fitted += options.shrinkage * e.trees.back().predict(X);
        residual = y - fitted;
        e.stage_mse.push_back(residual.squaredNorm() / static_cast<double>(y.size()));
    }
    return e;
}

ImportanceReport predictor_importance(const BoostedEnsemble& ensemble) {
    const auto p = static_cast<Eigen::Index>(ensemble.feature_names.size());
    ImportanceReport r;
    r.names = ensemble.feature_names;
    r.raw = Vector::Zero(p);
    for (const auto& t : ensemble.trees)
        for (const auto& n : t.nodes)
            if (!n.is_leaf()) r.raw(n.feature) += n.reduction;
    const double total = r.raw.sum();
    r.uninformative = !(total > 0.0);
    r.normalized = r.uninformative ? Vector::Zero(p) : Vector(r.raw / total);
    r.order.resize(static_cast<std::size_t>(p));
    std::iota(r.order.begin(), r.order.end(), Eigen::Index{0});
    std::stable_sort(r.order.begin(), r.order.end(), [&](Eigen::Index a, Eigen::Index b) { return r.raw(a) > r.raw(b); });
    return r;
}

void ImportanceReport::write_csv(std::ostream& out) const {
    out << "predictor,raw_reduction,normalized,rank\n";
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto f = order[k];
        out << names[static_cast<std::size_t>(f)] << ',' << format_double(raw(f)) << ',' << format_double(normalized(f))
            << ',' << (k + 1) << '\n';
    }
}

nlohmann::json ImportanceReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto f = order[k];
        rows.push_back({{"predictor", names[static_cast<std::size_t>(f)]},
                        {"raw_reduction", raw(f)},
                        {"normalized", normalized(f)},
                        {"rank", k + 1}});
    }
    return {{"uninformative", uninformative}, {"ranking", rows}};
}

std::vector<std::string> select_factors(const ImportanceReport& report, int top_k) {
    if (top_k < 1 || static_cast<std::size_t>(top_k) > report.order.size())
        throw ParameterError("top_k must lie in [1, " + std::to_string(report.order.size()) + "], got " +
                             std::to_string(top_k));
    std::vector<std::string> out;
    for (int k = 0; k < top_k; ++k) out.push_back(report.names[static_cast<std::size_t>(report.order[static_cast<std::size_t>(k)])]);
    return out;
}

}  // namespace cwr
