#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cwr/distance.hpp"
#include "cwr/table.hpp"
#include "cwr/wls.hpp"

namespace cwr {

/// Training inputs of a local model, extracted from an ObservationTable:
/// the design (intercept + raw covariates), the response, coordinates and the
/// standardized attribute columns used for attribute distance.
///
/// Attribute columns must be a subset of the regression covariates so a query
/// point's attribute vector can be read off its covariate vector.
struct RegressionData {
    std::vector<std::string> ids;
    Coordinates coords;
    Matrix design;
    Vector response;
    std::vector<std::string> covariates;
    Matrix attributes;                      // standardized, n x p
    std::vector<Eigen::Index> attribute_index;  // position of each attribute among `covariates`
    StandardizationTransform transform;
    std::vector<std::string> warnings;

    Eigen::Index size() const { return design.rows(); }
    Eigen::Index parameters() const { return design.cols(); }

    /// Zero-variance attribute columns are dropped (and reported in
    /// `warnings`); the surviving names are `transform.columns`.
    static RegressionData from_table(const ObservationTable& table, const std::vector<std::string>& covariates,
                                     const std::vector<std::string>& attribute_columns);

    /// Standardized attribute vectors of raw covariate rows.
    Matrix query_attributes(const Matrix& raw_covariates) const;
};

/// Normalized geographic and attribute distances among training points,
/// computed once and blended on demand.
class TrainingDistances {
public:
    TrainingDistances(const RegressionData& data, Normalization mode);

    DistanceMatrix blended(double rate) const;
    const DistanceScales& scales() const { return scales_; }
    bool has_attributes() const { return attr_.size() > 0; }

private:
    DistanceMatrix geo_;
    DistanceMatrix attr_;
    DistanceScales scales_;
};

enum class ScoreCriterion {
    leave_one_out,  // observation i predicted from a fit with its own weight removed
    in_sample,      // observation i predicted from its own local fit
};

std::string to_string(ScoreCriterion c);

struct SearchCandidate {
    double value = 0.0;
    double score = 0.0;               // +inf when the candidate failed
    std::optional<double> bandwidth;  // bandwidth used, for blend-rate candidates
    std::string failure;
};

/// Every candidate evaluated by a one-dimensional hyperparameter search.
struct HyperSearchTrace {
    std::string parameter;  // "bandwidth" or "rate"
    std::string criterion;
    std::vector<SearchCandidate> candidates;
    double selected = 0.0;
    double selected_score = 0.0;

    const SearchCandidate* find(double value) const;
};

/// A fitted GWR/CWR model: one coefficient row per training location.
struct LocalFit {
    Matrix coefficients;  // n x (B + 1)
    double bandwidth = 0.0;
    DistanceSpec spec;
    DistanceScales scales;
    std::vector<bool> regularized;
    std::optional<HyperSearchTrace> bandwidth_trace;
    std::optional<HyperSearchTrace> rate_trace;

    /// [1, x_i] . beta_i for every training location.
    Vector fitted(const RegressionData& data) const;
};

/// Per-location coefficients for a given blended training distance matrix.
/// With `exclude_self` each location's own observation gets weight zero.
struct LocalCoefficients {
    Matrix beta;
    std::vector<bool> regularized;
};
LocalCoefficients local_coefficients(const RegressionData& data, const DistanceMatrix& blended, double bandwidth,
                                     bool exclude_self = false);

/// GWR when spec.rate == 1, CWR otherwise. The bandwidth is in units of the
/// (normalized) blended distance.
LocalFit fit_local(const RegressionData& data, const DistanceSpec& spec, double bandwidth);
LocalFit fit_local(const ObservationTable& table, const std::vector<std::string>& covariates, const DistanceSpec& spec,
                   double bandwidth);

/// RMSE of per-location predictions under `criterion`. Throws when any local
/// fit fails.
double score_bandwidth(const RegressionData& data, const DistanceMatrix& blended, double bandwidth,
                       ScoreCriterion criterion);

/// 20 (or `count`) log-spaced values from the 1st percentile to the maximum of
/// the off-diagonal blended distances.
std::vector<double> default_bandwidth_grid(const DistanceMatrix& blended, int count = 20);

struct BandwidthSelection {
    double bandwidth = 0.0;
    HyperSearchTrace trace;
};

/// Grid search minimizing the leave-one-out RMSE. Ties keep the first
/// candidate. An empty grid selects from default_bandwidth_grid.
BandwidthSelection select_bandwidth(const RegressionData& data, const DistanceMatrix& blended,
                                    const std::vector<double>& grid);
BandwidthSelection select_bandwidth(const RegressionData& data, const DistanceSpec& spec,
                                    const std::vector<double>& grid);

struct BandwidthStrategy {
    enum class Mode { joint, fixed };
    Mode mode = Mode::joint;
    double fixed = 0.0;         // bandwidth for Mode::fixed
    std::vector<double> grid;   // explicit grid for Mode::joint; empty means default grid per rate
    int grid_size = 20;

    static BandwidthStrategy joint_search() { return {}; }
    static BandwidthStrategy fixed_bandwidth(double h) { return {Mode::fixed, h, {}, 20}; }
};

/// 0, 0.01, ..., 1 (101 values, ascending).
std::vector<double> default_rate_grid();

struct RateSearchOptions {
    BandwidthStrategy bandwidth;
    std::vector<double> rates = default_rate_grid();
    /// leave_one_out (default) or in_sample for scoring the blend rate. The
    /// bandwidth itself is always chosen by leave-one-out.
    ScoreCriterion criterion = ScoreCriterion::leave_one_out;
    Normalization normalization = Normalization::max_scale;
};

struct RateSelection {
    DistanceSpec spec;
    double bandwidth = 0.0;
    HyperSearchTrace trace;
    std::optional<HyperSearchTrace> bandwidth_trace;  // joint mode, for the selected rate
};

/// Linear search over blend rates. Rates are evaluated in ascending order
/// and ties go to the larger rate.
RateSelection select_rate(const RegressionData& data, const RateSearchOptions& options = {});

enum class PredictionKind { knn_coefficients, local_fit };
std::string to_string(PredictionKind k);
PredictionKind prediction_kind_from_string(const std::string& s);

struct PredictionMode {
    PredictionKind kind = PredictionKind::knn_coefficients;
    int k = 3;
};

struct QueryPoint {
    Eigen::Vector2d coord;
    Vector covariates;  // raw values, ordered as RegressionData::covariates
};

/// Blended distances from query points to every training location, using the
/// fit's stored normalizers.
DistanceMatrix query_distances(const LocalFit& fit, const RegressionData& data, const Coordinates& coords,
                               const Matrix& raw_covariates);

/// Indices of the k training locations nearest to a query, ties broken by
/// ascending row index.
std::vector<Eigen::Index> nearest(const Eigen::Ref<const Vector>& distances, int k);

double predict_query(const LocalFit& fit, const RegressionData& data, const QueryPoint& q,
                     const PredictionMode& mode = {});
Vector predict_queries(const LocalFit& fit, const RegressionData& data, const Coordinates& coords,
                       const Matrix& raw_covariates, const PredictionMode& mode = {});

}  // namespace cwr
