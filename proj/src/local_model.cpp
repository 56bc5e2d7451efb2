#include "cwr/local_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cwr {

// ------------------------------------------------------- regression data ---

RegressionData RegressionData::from_table(const ObservationTable& table, const std::vector<std::string>& covariates,
                                          const std::vector<std::string>& attribute_columns) {
    if (!table.has_response) throw InputError("training data needs a response column");
    RegressionData d;
    d.ids = table.ids;
    d.coords = table.coords;
    d.design = table.design(covariates);
    d.response = table.response;
    d.covariates = covariates;
    for (const auto& a : attribute_columns)
        if (std::find(covariates.begin(), covariates.end(), a) == covariates.end())
            throw ParameterError("attribute column '" + a + "' is not among the regression covariates");
    auto st = standardize(table, attribute_columns);
    d.transform = std::move(st.transform);
    d.attributes = std::move(st.values);
    d.warnings = std::move(st.warnings);
    for (const auto& a : d.transform.columns)
        d.attribute_index.push_back(
            static_cast<Eigen::Index>(std::find(covariates.begin(), covariates.end(), a) - covariates.begin()));
    return d;
}

Matrix RegressionData::query_attributes(const Matrix& raw_covariates) const {
    if (raw_covariates.cols() != static_cast<Eigen::Index>(covariates.size()))
        throw DimensionError("query covariates have " + std::to_string(raw_covariates.cols()) + " columns, expected " +
                             std::to_string(covariates.size()));
    Matrix raw(raw_covariates.rows(), static_cast<Eigen::Index>(attribute_index.size()));
    for (std::size_t k = 0; k < attribute_index.size(); ++k)
        raw.col(static_cast<Eigen::Index>(k)) = raw_covariates.col(attribute_index[k]);
    return transform.apply(raw);
}

// ------------------------------------------------------------- distances ---

TrainingDistances::TrainingDistances(const RegressionData& data, Normalization mode) {
    geo_ = geographic_distances(data.coords);
    if (data.attributes.cols() > 0) attr_ = attribute_distances(data.attributes);
    scales_ = fit_scales(geo_, attr_, mode);
    geo_ /= scales_.geo;
    if (attr_.size()) attr_ /= scales_.attr;
}

DistanceMatrix TrainingDistances::blended(double rate) const {
    if (rate == 1.0) return geo_;
    if (!has_attributes())
        throw ParameterError("blend rate " + std::to_string(rate) + " needs attribute columns, but none are available");
    return blend_distances(geo_, attr_, rate);
}

// ---------------------------------------------------------------- traces ---

std::string to_string(ScoreCriterion c) {
    return c == ScoreCriterion::leave_one_out ? "loo-rmse" : "in-sample-rmse";
}

const SearchCandidate* HyperSearchTrace::find(double value) const {
    for (const auto& c : candidates)
        if (c.value == value) return &c;
    return nullptr;
}

// ----------------------------------------------------------- local fits ---

namespace {

/// Columns whose kernel-weighted sums give every local X'WX and X'Wy at
/// once: x_a * x_b for a <= b, then x_a * y.
struct GramBasis {
    Matrix z;
    Eigen::Index p = 0;

    explicit GramBasis(const RegressionData& data) : p(data.parameters()) {
        const Eigen::Index n = data.size();
        z.resize(n, p * (p + 1) / 2 + p);
        Eigen::Index col = 0;
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = a; b < p; ++b) z.col(col++) = data.design.col(a).cwiseProduct(data.design.col(b));
        for (Eigen::Index a = 0; a < p; ++a) z.col(col++) = data.design.col(a).cwiseProduct(data.response);
    }
};

Matrix kernel_from_squared(const DistanceMatrix& squared, double bandwidth, bool exclude_self) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw ParameterError("bandwidth must be positive and finite, got " + std::to_string(bandwidth));
    Matrix w = detail::kernel_from_scaled_square(squared.array() / (bandwidth * bandwidth));
    if (exclude_self) w.diagonal().setZero();
    return w;
}

std::string location_label(const RegressionData& data, Eigen::Index i) {
    std::string label = "local fit at location " + std::to_string(i);
    if (static_cast<std::size_t>(i) < data.ids.size()) label += " (id " + data.ids[static_cast<std::size_t>(i)] + ")";
    return label;
}

LocalCoefficients solve_all(const RegressionData& data, const GramBasis& basis, const Matrix& weights) {
    const Eigen::Index n = data.size();
    const Eigen::Index p = basis.p;
    const Matrix sums = weights * basis.z;  // row i: sum_j w_ij z_j
    LocalCoefficients out;
    out.beta.resize(n, p);
    out.regularized.assign(static_cast<std::size_t>(n), false);
    Matrix gram(p, p);
    Vector moment(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = a; b < p; ++b) gram(a, b) = gram(b, a) = sums(i, col++);
        for (Eigen::Index a = 0; a < p; ++a) moment(a) = sums(i, col++);
        LocalSolution<double> sol;
        try {
            sol = solve_normal_equations(gram, moment);
        } catch (const SingularityError& e) {
            throw SingularityError(location_label(data, i) + ": " + e.what());
        } catch (const DegenerateWeightsError& e) {
            throw DegenerateWeightsError(location_label(data, i) + ": " + e.what());
        }
        out.beta.row(i) = sol.beta.transpose();
        out.regularized[static_cast<std::size_t>(i)] = sol.regularized;
    }
    return out;
}

double score_from_squared(const RegressionData& data, const GramBasis& basis, const DistanceMatrix& squared,
                          double bandwidth, ScoreCriterion criterion) {
    const Matrix w = kernel_from_squared(squared, bandwidth, criterion == ScoreCriterion::leave_one_out);
    const auto coef = solve_all(data, basis, w);
    const Vector predicted = data.design.cwiseProduct(coef.beta).rowwise().sum();
    return rmse(data.response, predicted);
}

}  // namespace

LocalCoefficients local_coefficients(const RegressionData& data, const DistanceMatrix& blended, double bandwidth,
                                     bool exclude_self) {
    if (blended.rows() != data.size() || blended.cols() != data.size())
        throw DimensionError("blended distance matrix does not match the training data");
    const GramBasis basis(data);
    const DistanceMatrix squared = blended.array().square().matrix();
    return solve_all(data, basis, kernel_from_squared(squared, bandwidth, exclude_self));
}

Vector LocalFit::fitted(const RegressionData& data) const {
    if (coefficients.rows() != data.size() || coefficients.cols() != data.parameters())
        throw DimensionError("local fit does not match the training data");
    return data.design.cwiseProduct(coefficients).rowwise().sum();
}

LocalFit fit_local(const RegressionData& data, const DistanceSpec& spec, double bandwidth) {
    spec.validate();
    if (data.size() < data.parameters() + 1)
        throw ParameterError("local fits need n >= B + 2 observations, got n = " + std::to_string(data.size()));
    const TrainingDistances distances(data, spec.normalization);
    const auto coef = local_coefficients(data, distances.blended(spec.rate), bandwidth);
    LocalFit fit;
    fit.coefficients = coef.beta;
    fit.regularized = coef.regularized;
    fit.bandwidth = bandwidth;
    fit.spec = spec;
    fit.spec.attribute_columns = data.transform.columns;
    fit.scales = distances.scales();
    return fit;
}

LocalFit fit_local(const ObservationTable& table, const std::vector<std::string>& covariates, const DistanceSpec& spec,
                   double bandwidth) {
    const auto data = RegressionData::from_table(table, covariates, spec.rate < 1.0 ? spec.attribute_columns
                                                                                    : std::vector<std::string>{});
    return fit_local(data, spec, bandwidth);
}

double score_bandwidth(const RegressionData& data, const DistanceMatrix& blended, double bandwidth,
                       ScoreCriterion criterion) {
    if (blended.rows() != data.size() || blended.cols() != data.size())
        throw DimensionError("blended distance matrix does not match the training data");
    const GramBasis basis(data);
    return score_from_squared(data, basis, blended.array().square().matrix(), bandwidth, criterion);
}

// ------------------------------------------------------------- searches ---

std::vector<double> default_bandwidth_grid(const DistanceMatrix& blended, int count) {
    if (count < 1) throw ParameterError("bandwidth grid needs at least one candidate");
    std::vector<double> entries;
    const bool square = blended.rows() == blended.cols();
    for (Eigen::Index j = 0; j < blended.cols(); ++j)
        for (Eigen::Index i = 0; i < blended.rows(); ++i)
            if (!square || i < j) entries.push_back(blended(i, j));
    const double hi = entries.empty() ? 0.0 : *std::max_element(entries.begin(), entries.end());
    if (!(hi > 0.0)) return {1.0};  // all points coincide: every kernel weight is 1 regardless

    // 1st percentile with linear interpolation between order statistics.
    const double pos = 0.01 * static_cast<double>(entries.size() - 1);
    const auto lo_idx = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo_idx);
    std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(lo_idx), entries.end());
    double lo = entries[lo_idx];
    if (lo_idx + 1 < entries.size()) {
        const double next = *std::min_element(entries.begin() + static_cast<std::ptrdiff_t>(lo_idx) + 1, entries.end());
        lo += frac * (next - lo);
    }
    if (!(lo > 0.0)) {
        lo = hi;
        for (double e : entries)
            if (e > 0.0 && e < lo) lo = e;
    }
    if (count == 1 || lo >= hi) return {hi};

    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

namespace {

BandwidthSelection select_bandwidth_squared(const RegressionData& data, const GramBasis& basis,
                                            const DistanceMatrix& blended, const DistanceMatrix& squared,
                                            std::vector<double> grid, int grid_size) {
    if (grid.empty()) grid = default_bandwidth_grid(blended, grid_size);
    for (double h : grid)
        if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("bandwidth candidates must be positive and finite");

    BandwidthSelection out;
    out.trace.parameter = "bandwidth";
    out.trace.criterion = to_string(ScoreCriterion::leave_one_out);
    double best = std::numeric_limits<double>::infinity();
    for (double h : grid) {
        SearchCandidate c{h, std::numeric_limits<double>::infinity(), std::nullopt, {}};
        try {
            c.score = score_from_squared(data, basis, squared, h, ScoreCriterion::leave_one_out);
            if (!std::isfinite(c.score)) {
                c.failure = "non-finite score";
                c.score = std::numeric_limits<double>::infinity();
            }
        } catch (const Error& e) {
            c.failure = e.what();
        }
        if (c.score < best) {
            best = c.score;
            out.bandwidth = h;
        }
        out.trace.candidates.push_back(std::move(c));
    }
    if (!std::isfinite(best)) {
        std::string msg = "no bandwidth candidate produced a valid fit";
        if (!out.trace.candidates.empty()) msg += "; last failure: " + out.trace.candidates.back().failure;
        throw SearchFailure(msg);
    }
    out.trace.selected = out.bandwidth;
    out.trace.selected_score = best;
    return out;
}

}  // namespace

BandwidthSelection select_bandwidth(const RegressionData& data, const DistanceMatrix& blended,
                                    const std::vector<double>& grid) {
    if (blended.rows() != data.size() || blended.cols() != data.size())
        throw DimensionError("blended distance matrix does not match the training data");
    const GramBasis basis(data);
    return select_bandwidth_squared(data, basis, blended, blended.array().square().matrix(), grid, 20);
}

BandwidthSelection select_bandwidth(const RegressionData& data, const DistanceSpec& spec,
                                    const std::vector<double>& grid) {
    spec.validate();
    const TrainingDistances distances(data, spec.normalization);
    return select_bandwidth(data, distances.blended(spec.rate), grid);
}

std::vector<double> default_rate_grid() {
    std::vector<double> rates(101);
    for (int k = 0; k <= 100; ++k) rates[static_cast<std::size_t>(k)] = k / 100.0;
    return rates;
}

RateSelection select_rate(const RegressionData& data, const RateSearchOptions& options) {
    if (options.rates.empty()) throw ParameterError("blend-rate grid is empty");
    std::vector<double> rates = options.rates;
    for (double r : rates)
        if (!(r >= 0.0 && r <= 1.0)) throw ParameterError("blend-rate candidates must lie in [0, 1]");
    std::sort(rates.begin(), rates.end());
    const auto& bw = options.bandwidth;
    if (bw.mode == BandwidthStrategy::Mode::fixed && (!(bw.fixed > 0.0) || !std::isfinite(bw.fixed)))
        throw ParameterError("fixed bandwidth must be positive and finite");

    const TrainingDistances distances(data, options.normalization);
    if (rates.front() < 1.0 && !distances.has_attributes())
        throw ParameterError("blend-rate search needs at least one attribute column with nonzero variance");
    const GramBasis basis(data);

    RateSelection out;
    out.trace.parameter = "rate";
    out.trace.criterion = to_string(options.criterion);
    double best = std::numeric_limits<double>::infinity();
    for (double r : rates) {
        SearchCandidate c{r, std::numeric_limits<double>::infinity(), std::nullopt, {}};
        std::optional<HyperSearchTrace> h_trace;
        try {
            const DistanceMatrix blended = distances.blended(r);
            const DistanceMatrix squared = blended.array().square().matrix();
            if (bw.mode == BandwidthStrategy::Mode::joint) {
                auto sel = select_bandwidth_squared(data, basis, blended, squared, bw.grid, bw.grid_size);
                c.bandwidth = sel.bandwidth;
                c.score = options.criterion == ScoreCriterion::leave_one_out
                              ? sel.trace.selected_score
                              : score_from_squared(data, basis, squared, sel.bandwidth, options.criterion);
                h_trace = std::move(sel.trace);
            } else {
                c.bandwidth = bw.fixed;
                c.score = score_from_squared(data, basis, squared, bw.fixed, options.criterion);
            }
            if (!std::isfinite(c.score)) {
                c.failure = "non-finite score";
                c.score = std::numeric_limits<double>::infinity();
            }
        } catch (const Error& e) {
            c.failure = e.what();
        }
        if (std::isfinite(c.score) && c.score <= best) {
            best = c.score;
            out.spec.rate = r;
            out.bandwidth = *c.bandwidth;
            out.bandwidth_trace = std::move(h_trace);
        }
        out.trace.candidates.push_back(std::move(c));
    }
    if (!std::isfinite(best)) throw SearchFailure("no blend-rate candidate produced a valid fit");
    out.trace.selected = out.spec.rate;
    out.trace.selected_score = best;
    out.spec.attribute_columns = data.transform.columns;
    out.spec.normalization = options.normalization;
    return out;
}

// ----------------------------------------------------------- prediction ---

std::string to_string(PredictionKind k) { return k == PredictionKind::knn_coefficients ? "knn-coef" : "local-fit"; }

PredictionKind prediction_kind_from_string(const std::string& s) {
    if (s == "knn-coef") return PredictionKind::knn_coefficients;
    if (s == "local-fit") return PredictionKind::local_fit;
    throw ParameterError("unknown prediction mode '" + s + "' (expected knn-coef or local-fit)");
}

DistanceMatrix query_distances(const LocalFit& fit, const RegressionData& data, const Coordinates& coords,
                               const Matrix& raw_covariates) {
    if (coords.rows() != raw_covariates.rows()) throw DimensionError("query coordinates and covariates differ in length");
    DistanceMatrix geo = geographic_distances(coords, data.coords) / fit.scales.geo;
    if (fit.spec.rate == 1.0) return geo;
    const Matrix qa = data.query_attributes(raw_covariates);
    const DistanceMatrix attr = attribute_distances(qa, data.attributes) / fit.scales.attr;
    return blend_distances(geo, attr, fit.spec.rate);
}

std::vector<Eigen::Index> nearest(const Eigen::Ref<const Vector>& distances, int k) {
    if (k < 1 || k > distances.size())
        throw ParameterError("K must lie in [1, " + std::to_string(distances.size()) + "], got " + std::to_string(k));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(distances.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return distances(a) < distances(b) || (distances(a) == distances(b) && a < b);
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

Vector predict_queries(const LocalFit& fit, const RegressionData& data, const Coordinates& coords,
                       const Matrix& raw_covariates, const PredictionMode& mode) {
    if (fit.coefficients.rows() != data.size()) throw DimensionError("local fit does not match the training data");
    if (raw_covariates.cols() != static_cast<Eigen::Index>(data.covariates.size()))
        throw DimensionError("query covariates have " + std::to_string(raw_covariates.cols()) + " columns, expected " +
                             std::to_string(data.covariates.size()));
    if (!raw_covariates.allFinite()) throw InputError("query covariates contain non-finite values");
    if (mode.kind == PredictionKind::knn_coefficients && (mode.k < 1 || mode.k > data.size()))
        throw ParameterError("K must lie in [1, " + std::to_string(data.size()) + "], got " + std::to_string(mode.k));

    const DistanceMatrix d = query_distances(fit, data, coords, raw_covariates);
    const Eigen::Index m = coords.rows();
    Vector out(m);
    Vector x(data.parameters());
    for (Eigen::Index q = 0; q < m; ++q) {
        x(0) = 1.0;
        x.tail(x.size() - 1) = raw_covariates.row(q).transpose();
        Vector beta;
        if (mode.kind == PredictionKind::knn_coefficients) {
            beta = Vector::Zero(data.parameters());
            const auto idx = nearest(d.row(q).transpose(), mode.k);
            for (auto i : idx) beta += fit.coefficients.row(i).transpose();
            beta /= static_cast<double>(idx.size());
        } else {
            const Vector w = gaussian_weights(d.row(q).transpose(), fit.bandwidth);
            beta = solve_local_wls(data.design, data.response, w, "local fit at query " + std::to_string(q)).beta;
        }
        out(q) = x.dot(beta);
    }
    return out;
}

double predict_query(const LocalFit& fit, const RegressionData& data, const QueryPoint& q, const PredictionMode& mode) {
    Coordinates c(1, 2);
    c.row(0) = q.coord.transpose();
    return predict_queries(fit, data, c, q.covariates.transpose(), mode)(0);
}

}  // namespace cwr
