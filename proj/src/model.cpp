#include "cwr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace cwr {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::ols: return "ols";
        case ModelKind::gwr: return "gwr";
        case ModelKind::cwr: return "cwr";
        case ModelKind::lsboost: return "lsboost";
    }
    return "?";
}

std::string display_name(ModelKind k) {
    switch (k) {
        case ModelKind::ols: return "OLS";
        case ModelKind::gwr: return "GWR";
        case ModelKind::cwr: return "CWR";
        case ModelKind::lsboost: return "LSBoost";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ols" || s == "OLS") return ModelKind::ols;
    if (s == "gwr" || s == "GWR") return ModelKind::gwr;
    if (s == "cwr" || s == "CWR") return ModelKind::cwr;
    if (s == "lsboost" || s == "LSBoost") return ModelKind::lsboost;
    throw ParameterError("unknown model '" + s + "' (expected ols, gwr, cwr or lsboost)");
}

// ------------------------------------------------------------- training ---

FittedModel train_model(const ObservationTable& train, const ModelConfig& config) {
    if (config.covariates.empty()) throw ParameterError("no regression covariates configured");
    FittedModel m;
    m.kind = config.kind;
    m.covariates = config.covariates;
    m.prediction = config.prediction;

    switch (config.kind) {
        case ModelKind::ols:
            m.beta = fit_ols(train.design(config.covariates), train.response, "OLS fit");
            break;
        case ModelKind::lsboost:
            m.boost = fit_lsboost(train.columns(config.covariates), train.response, config.boost, config.covariates);
            break;
        case ModelKind::gwr:
        case ModelKind::cwr: {
            std::vector<std::string> attrs;
            const bool geographic_only = config.kind == ModelKind::gwr || (config.rate && *config.rate == 1.0);
            if (!geographic_only) {
                attrs = config.attribute_columns;
                if (attrs.empty())
                    for (const auto& c : config.covariates)
                        if (!train.dummy[static_cast<std::size_t>(train.covariate_index(c))]) attrs.push_back(c);
            }
            m.training = RegressionData::from_table(train, config.covariates, attrs);
            const auto& data = *m.training;

            if (config.kind == ModelKind::cwr && !config.rate) {
                RateSearchOptions opt;
                opt.rates = config.rates;
                opt.criterion = config.strict_paper_scoring ? ScoreCriterion::in_sample : ScoreCriterion::leave_one_out;
                opt.normalization = config.normalization;
                if (config.bandwidth) opt.bandwidth = BandwidthStrategy::fixed_bandwidth(*config.bandwidth);
                auto sel = select_rate(data, opt);
                m.local = fit_local(data, sel.spec, sel.bandwidth);
                m.local->rate_trace = std::move(sel.trace);
                m.local->bandwidth_trace = std::move(sel.bandwidth_trace);
            } else {
                DistanceSpec spec;
                spec.rate = config.kind == ModelKind::gwr ? 1.0 : *config.rate;
                spec.attribute_columns = data.transform.columns;
                spec.normalization = config.normalization;
                double h = 0.0;
                std::optional<HyperSearchTrace> trace;
                if (config.bandwidth) {
                    h = *config.bandwidth;
                } else {
                    auto sel = select_bandwidth(data, spec, {});
                    h = sel.bandwidth;
                    trace = std::move(sel.trace);
                }
                m.local = fit_local(data, spec, h);
                m.local->bandwidth_trace = std::move(trace);
            }
            break;
        }
    }
    return m;
}

// ----------------------------------------------------------- prediction ---

Vector FittedModel::predict(const ObservationTable& queries) const {
    return predict(queries.coords, queries.columns(covariates));
}

Vector FittedModel::predict(const Coordinates& coords, const Matrix& raw) const {
    if (raw.cols() != static_cast<Eigen::Index>(covariates.size()))
        throw DimensionError("model expects " + std::to_string(covariates.size()) + " covariates, got " +
                             std::to_string(raw.cols()));
    switch (kind) {
        case ModelKind::ols: {
            Matrix X(raw.rows(), raw.cols() + 1);
            X.col(0).setOnes();
            X.rightCols(raw.cols()) = raw;
            return cwr::predict(X, beta);
        }
        case ModelKind::lsboost: return boost->predict(raw);
        case ModelKind::gwr:
        case ModelKind::cwr: return predict_queries(*local, *training, coords, raw, prediction);
    }
    return {};
}

// -------------------------------------------------------- serialization ---

namespace {

nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json matrix_rows(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Matrix matrix_from_rows(const nlohmann::json& j, Eigen::Index cols) {
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vector r = vector_from(j[i]);
        if (r.size() != cols) throw InputError("model document has a ragged matrix");
        m.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    return m;
}

std::string normalization_name(Normalization n) { return n == Normalization::max_scale ? "max-scale" : "none"; }
Normalization normalization_from(const std::string& s) {
    if (s == "max-scale") return Normalization::max_scale;
    if (s == "none") return Normalization::none;
    throw InputError("unknown normalization '" + s + "'");
}

nlohmann::json tree_json(const RegressionTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.reduction, n.count});
    return nodes;
}

RegressionTree tree_from(const nlohmann::json& j) {
    RegressionTree t;
    for (const auto& n : j)
        t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                           n.at(4).get<double>(), n.at(5).get<double>(), n.at(6).get<Eigen::Index>()});
    return t;
}

}  // namespace

nlohmann::json to_json(const HyperSearchTrace& trace) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : trace.candidates) {
        nlohmann::json e{{"value", c.value}, {"score", number(c.score)}};
        if (c.bandwidth) e["bandwidth"] = *c.bandwidth;
        if (!c.failure.empty()) e["failure"] = c.failure;
        cands.push_back(std::move(e));
    }
    return {{"parameter", trace.parameter},
            {"criterion", trace.criterion},
            {"selected", trace.selected},
            {"selected_score", number(trace.selected_score)},
            {"candidates", cands}};
}

HyperSearchTrace trace_from_json(const nlohmann::json& j) {
    HyperSearchTrace t;
    t.parameter = j.at("parameter").get<std::string>();
    t.criterion = j.at("criterion").get<std::string>();
    t.selected = j.at("selected").get<double>();
    t.selected_score = number_from(j.at("selected_score"));
    for (const auto& c : j.at("candidates")) {
        SearchCandidate s{c.at("value").get<double>(), number_from(c.at("score")), std::nullopt,
                          c.value("failure", std::string())};
        if (c.contains("bandwidth")) s.bandwidth = c["bandwidth"].get<double>();
        t.candidates.push_back(std::move(s));
    }
    return t;
}

nlohmann::json FittedModel::hyperparameters() const {
    nlohmann::json h = nlohmann::json::object();
    if (local) {
        h["bandwidth"] = local->bandwidth;
        h["rate"] = local->spec.rate;
        h["knn"] = prediction.k;
        h["predict_mode"] = to_string(prediction.kind);
        h["normalization"] = normalization_name(local->spec.normalization);
        h["attribute_columns"] = local->spec.attribute_columns;
        h["scales"] = {{"geo", local->scales.geo}, {"attr", local->scales.attr}};
        std::size_t reg = 0;
        for (bool b : local->regularized) reg += b ? 1 : 0;
        h["regularized_locations"] = reg;
    }
    if (boost) {
        h["trees"] = boost->options.trees;
        h["shrinkage"] = boost->options.shrinkage;
        h["max_depth"] = boost->options.max_depth;
        h["min_leaf"] = boost->options.min_leaf;
    }
    return h;
}

nlohmann::json FittedModel::to_json() const {
    nlohmann::json j{{"format", "cwr-model"},
                     {"version", kFormatVersion},
                     {"model", to_string(kind)},
                     {"covariates", covariates},
                     {"hyperparameters", hyperparameters()}};
    switch (kind) {
        case ModelKind::ols: j["coefficients"] = vector_json(beta); break;
        case ModelKind::lsboost: {
            nlohmann::json trees = nlohmann::json::array();
            for (const auto& t : boost->trees) trees.push_back(tree_json(t));
            j["initial"] = boost->initial;
            j["trees"] = trees;
            j["stage_mse"] = boost->stage_mse;
            break;
        }
        case ModelKind::gwr:
        case ModelKind::cwr: {
            const auto& d = *training;
            j["hyperparameters"]["standardization"] = d.transform.to_json();
            j["coefficients"] = matrix_rows(local->coefficients);
            j["regularized"] = local->regularized;
            nlohmann::json traces = nlohmann::json::object();
            if (local->bandwidth_trace) traces["bandwidth"] = cwr::to_json(*local->bandwidth_trace);
            if (local->rate_trace) traces["rate"] = cwr::to_json(*local->rate_trace);
            j["traces"] = traces;
            j["training"] = {{"ids", d.ids},
                             {"u", vector_json(d.coords.col(0))},
                             {"v", vector_json(d.coords.col(1))},
                             {"response", vector_json(d.response)},
                             {"design", matrix_rows(d.design)}};
            break;
        }
    }
    return j;
}

FittedModel FittedModel::from_json(const nlohmann::json& j) {
    FittedModel m;
    try {
        if (j.at("format").get<std::string>() != "cwr-model") throw InputError("not a cwr-model document");
        const int version = j.at("version").get<int>();
        if (version != kFormatVersion) throw InputError("unsupported model format version " + std::to_string(version));
        m.kind = model_kind_from_string(j.at("model").get<std::string>());
        m.covariates = j.at("covariates").get<std::vector<std::string>>();
        const auto& h = j.at("hyperparameters");
        const auto p = static_cast<Eigen::Index>(m.covariates.size()) + 1;
        switch (m.kind) {
            case ModelKind::ols:
                m.beta = vector_from(j.at("coefficients"));
                if (m.beta.size() != p) throw InputError("OLS coefficient count does not match covariates");
                break;
            case ModelKind::lsboost: {
                BoostedEnsemble e;
                e.initial = j.at("initial").get<double>();
                e.options = {h.at("trees").get<int>(), h.at("shrinkage").get<double>(), h.at("max_depth").get<int>(),
                             h.at("min_leaf").get<int>()};
                for (const auto& t : j.at("trees")) e.trees.push_back(tree_from(t));
                e.stage_mse = j.value("stage_mse", std::vector<double>{});
                e.feature_names = m.covariates;
                m.boost = std::move(e);
                break;
            }
            case ModelKind::gwr:
            case ModelKind::cwr: {
                const auto& t = j.at("training");
                RegressionData d;
                d.ids = t.at("ids").get<std::vector<std::string>>();
                const Vector u = vector_from(t.at("u"));
                const Vector v = vector_from(t.at("v"));
                d.coords.resize(u.size(), 2);
                d.coords.col(0) = u;
                d.coords.col(1) = v;
                d.response = vector_from(t.at("response"));
                d.design = matrix_from_rows(t.at("design"), p);
                d.covariates = m.covariates;
                d.transform = StandardizationTransform::from_json(h.at("standardization"));
                for (const auto& a : d.transform.columns) {
                    const auto it = std::find(d.covariates.begin(), d.covariates.end(), a);
                    if (it == d.covariates.end()) throw InputError("attribute column '" + a + "' is not a covariate");
                    d.attribute_index.push_back(static_cast<Eigen::Index>(it - d.covariates.begin()));
                }
                d.attributes = d.query_attributes(d.design.rightCols(p - 1));
                if (d.coords.rows() != d.design.rows() || d.response.size() != d.design.rows() ||
                    static_cast<Eigen::Index>(d.ids.size()) != d.design.rows())
                    throw InputError("model training block has inconsistent lengths");

                LocalFit f;
                f.bandwidth = h.at("bandwidth").get<double>();
                f.spec.rate = h.at("rate").get<double>();
                f.spec.attribute_columns = h.at("attribute_columns").get<std::vector<std::string>>();
                f.spec.normalization = normalization_from(h.at("normalization").get<std::string>());
                f.scales = {h.at("scales").at("geo").get<double>(), h.at("scales").at("attr").get<double>()};
                f.coefficients = matrix_from_rows(j.at("coefficients"), p);
                if (f.coefficients.rows() != d.design.rows())
                    throw InputError("coefficient matrix does not match the training block");
                f.regularized = j.at("regularized").get<std::vector<bool>>();
                const auto& traces = j.at("traces");
                if (traces.contains("bandwidth")) f.bandwidth_trace = trace_from_json(traces["bandwidth"]);
                if (traces.contains("rate")) f.rate_trace = trace_from_json(traces["rate"]);
                m.prediction.k = h.at("knn").get<int>();
                m.prediction.kind = prediction_kind_from_string(h.at("predict_mode").get<std::string>());
                m.training = std::move(d);
                m.local = std::move(f);
                break;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed model document: ") + e.what());
    }
    return m;
}

void FittedModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file '" + path + "'");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write to '" + path + "' failed");
}

FittedModel FittedModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("model file '" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace cwr
