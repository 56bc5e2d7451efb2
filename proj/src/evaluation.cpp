#include "cwr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace cwr {

double improvement_pct(double baseline_rmse, double model_rmse) {
    if (!(baseline_rmse > 0.0)) throw ParameterError("improvement is undefined for a zero baseline RMSE");
    return (baseline_rmse - model_rmse) / baseline_rmse * 100.0;
}

const ModelResult* ComparisonReport::result(ModelKind k) const {
    for (const auto& r : results)
        if (r.kind == k) return &r;
    return nullptr;
}

std::map<std::string, std::map<std::string, double>> ComparisonReport::improvements() const {
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& a : results) {
        if (!a.ok) continue;
        for (const auto& b : results) {
            if (!b.ok || a.kind == b.kind || !(b.test_rmse > 0.0)) continue;
            out[display_name(a.kind)][display_name(b.kind)] = improvement_pct(b.test_rmse, a.test_rmse);
        }
    }
    return out;
}

namespace {

nlohmann::json config_json(const CompareConfig& c) {
    std::vector<std::string> models;
    for (auto k : c.models) models.push_back(to_string(k));
    const auto& m = c.model;
    nlohmann::json j{{"models", models},
                     {"seed", c.split.seed},
                     {"train_frac", c.split.train_fraction},
                     {"split_algorithm", kSplitAlgorithm},
                     {"top_k", c.top_k},
                     {"knn", m.prediction.k},
                     {"predict_mode", to_string(m.prediction.kind)},
                     {"strict_paper_scoring", m.strict_paper_scoring},
                     {"normalization", m.normalization == Normalization::max_scale ? "max-scale" : "none"},
                     {"boost",
                      {{"trees", m.boost.trees},
                       {"shrinkage", m.boost.shrinkage},
                       {"max_depth", m.boost.max_depth},
                       {"min_leaf", m.boost.min_leaf}}}};
    j["rate"] = m.rate ? nlohmann::json(*m.rate) : nlohmann::json("search");
    j["bandwidth"] = m.bandwidth ? nlohmann::json(*m.bandwidth) : nlohmann::json("cv");
    if (!m.rate) {
        j["rate_grid"] = {{"count", m.rates.size()},
                          {"min", m.rates.empty() ? 0.0 : *std::min_element(m.rates.begin(), m.rates.end())},
                          {"max", m.rates.empty() ? 0.0 : *std::max_element(m.rates.begin(), m.rates.end())}};
    }
    if (!c.covariates.empty()) j["covariates"] = c.covariates;
    return j;
}

}  // namespace

nlohmann::json ComparisonReport::to_json() const {
    nlohmann::json models = nlohmann::json::object();
    for (const auto& r : results) {
        nlohmann::json e;
        if (r.ok) {
            e = {{"status", "ok"},
                 {"test_rmse", r.test_rmse},
                 {"train_rmse", r.train_rmse},
                 {"hyperparameters", r.hyperparameters}};
        } else {
            e = {{"status", "failed"}, {"error", {{"kind", r.error_kind}, {"message", r.error_message}}}};
        }
        if (config.timings) e["runtime_ms"] = r.runtime_ms;
        models[display_name(r.kind)] = std::move(e);
    }

    nlohmann::json records = nlohmann::json::array();
    for (std::size_t i = 0; i < test_ids.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        nlohmann::json predicted = nlohmann::json::object(), residual = nlohmann::json::object();
        for (const auto& r : results) {
            if (!r.ok) continue;
            predicted[display_name(r.kind)] = r.predictions(row);
            residual[display_name(r.kind)] = test_actual(row) - r.predictions(row);
        }
        records.push_back({{"id", test_ids[i]},
                           {"u", test_coords(row, 0)},
                           {"v", test_coords(row, 1)},
                           {"actual", test_actual(row)},
                           {"predicted", predicted},
                           {"residual", residual}});
    }

    nlohmann::json j{{"format", "cwr-comparison"},
                     {"version", 1},
                     {"name", name},
                     {"config", config_json(config)},
                     {"sizes", {{"train", train_size}, {"test", test_ids.size()}}},
                     {"covariates", covariates},
                     {"models", models},
                     {"improvement_pct", improvements()},
                     {"records", records}};
    if (importance) j["importance"] = importance->to_json();
    return j;
}

ComparisonReport run_comparison(const ObservationTable& data, const CompareConfig& config, std::string name) {
    data.validate();
    if (!data.has_response) throw InputError("comparison data needs a response column");
    if (config.models.empty()) throw ParameterError("no models configured");

    ComparisonReport report;
    report.name = std::move(name);
    report.config = config;
    const auto [train, test] = split(data, config.split);
    report.train_size = train.size();
    report.test_ids = test.ids;
    report.test_coords = test.coords;
    report.test_actual = test.response;

    if (!config.covariates.empty()) {
        report.covariates = config.covariates;
    } else if (config.top_k > 0) {
        const auto ensemble = fit_lsboost(train.covariates, train.response, config.model.boost, train.covariate_names);
        report.importance = predictor_importance(ensemble);
        const int k = std::min<int>(config.top_k, static_cast<int>(train.covariate_names.size()));
        report.covariates = select_factors(*report.importance, k);
    } else {
        report.covariates = train.covariate_names;
    }

    for (const auto kind : config.models) {
        ModelResult r;
        r.kind = kind;
        const auto start = std::chrono::steady_clock::now();
        try {
            ModelConfig mc = config.model;
            mc.kind = kind;
            mc.covariates = report.covariates;
            const FittedModel model = train_model(train, mc);
            r.predictions = model.predict(test);
            r.test_rmse = rmse(test.response, r.predictions);
            r.train_rmse = rmse(train.response, model.predict(train));
            r.hyperparameters = model.hyperparameters();
            r.ok = true;
        } catch (const Error& e) {
            r.error_kind = e.kind();
            r.error_message = e.what();
        } catch (const std::exception& e) {
            r.error_kind = "internal";
            r.error_message = e.what();
        }
        r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        report.results.push_back(std::move(r));
    }
    return report;
}

nlohmann::json run_batch(const std::string& manifest_path, const CompareConfig& base) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("manifest is not valid JSON: " + std::string(e.what()));
    }
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return (path.is_absolute() ? path : dir / path).string();
    };

    nlohmann::json cases = nlohmann::json::object();
    nlohmann::json rmse_table = nlohmann::json::object();
    nlohmann::json rates = nlohmann::json::object();
    nlohmann::json cwr_vs_gwr = nlohmann::json::object();
    try {
        for (const auto& c : manifest.at("cases")) {
            const auto name = c.at("name").get<std::string>();
            if (cases.contains(name)) throw InputError("duplicate case name '" + name + "' in manifest");
            CompareConfig cfg = base;
            cfg.split.seed = c.value("seed", cfg.split.seed);
            cfg.split.train_fraction = c.value("train_frac", cfg.split.train_fraction);
            const auto schema = Schema::load(resolve(c.at("schema").get<std::string>()));
            const auto loaded = load_csv(resolve(c.at("data").get<std::string>()), schema);
            const auto report = run_comparison(loaded.table, cfg, name);
            nlohmann::json row = nlohmann::json::object();
            for (const auto& r : report.results)
                row[display_name(r.kind)] = r.ok ? nlohmann::json(r.test_rmse) : nlohmann::json(nullptr);
            rmse_table[name] = row;
            if (const auto* r = report.result(ModelKind::cwr); r && r->ok && r->hyperparameters.contains("rate"))
                rates[name] = r->hyperparameters["rate"];
            const auto imp = report.improvements();
            if (imp.count("CWR") && imp.at("CWR").count("GWR")) cwr_vs_gwr[name] = imp.at("CWR").at("GWR");
            cases[name] = report.to_json();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed manifest: ") + e.what());
    }
    return {{"format", "cwr-batch"},
            {"version", 1},
            {"cases", cases},
            {"summary", {{"rmse", rmse_table}, {"cwr_rate", rates}, {"cwr_improvement_over_gwr_pct", cwr_vs_gwr}}}};
}

// ------------------------------------------------------------------ maps ---

namespace {

double median(Vector v) {
    if (v.size() == 0) throw InputError("median of an empty column");
    std::sort(v.data(), v.data() + v.size());
    const auto n = v.size();
    return n % 2 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

}  // namespace

GridExport build_maps(const FittedModel& model, const ObservationTable& train, const ObservationTable& test,
                      const LatticeSpec& lattice) {
    if (lattice.cells_u < 1 || lattice.cells_v < 1) throw ParameterError("lattice needs at least one cell per axis");
    if (train.size() == 0) throw InputError("map export needs training data");
    GridExport out;

    const double u_lo = train.coords.col(0).minCoeff(), u_hi = train.coords.col(0).maxCoeff();
    const double v_lo = train.coords.col(1).minCoeff(), v_hi = train.coords.col(1).maxCoeff();
    auto axis = [](double lo, double hi, int count, int k) {
        return count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    };
    const Eigen::Index m = static_cast<Eigen::Index>(lattice.cells_u) * lattice.cells_v;
    out.lattice.resize(m, 2);
    Eigen::Index row = 0;
    for (int iv = 0; iv < lattice.cells_v; ++iv)
        for (int iu = 0; iu < lattice.cells_u; ++iu, ++row) {
            out.lattice(row, 0) = axis(u_lo, u_hi, lattice.cells_u, iu);
            out.lattice(row, 1) = axis(v_lo, v_hi, lattice.cells_v, iv);
        }
    const Matrix train_cov = train.columns(model.covariates);
    Vector medians(train_cov.cols());
    for (Eigen::Index c = 0; c < train_cov.cols(); ++c) medians(c) = median(train_cov.col(c));
    out.lattice_covariates = medians.transpose().replicate(m, 1);
    out.lattice_predicted = model.predict(out.lattice, out.lattice_covariates);

    if (!test.has_response) throw InputError("residual export needs actual prices for the evaluation records");
    out.residual_ids = test.ids;
    out.residual_coords = test.coords;
    out.actual = test.response;
    out.predicted = model.predict(test);
    out.residual = out.actual - out.predicted;
    return out;
}

GridExport export_maps(const FittedModel& model, const ObservationTable& train, const ObservationTable& test,
                       const LatticeSpec& lattice, const std::string& out_prefix) {
    GridExport g = build_maps(model, train, test, lattice);

    const std::string grid_path = out_prefix + "_grid.csv";
    std::ofstream grid(grid_path);
    if (!grid) throw IoError("cannot write '" + grid_path + "'");
    grid << "u,v";
    for (const auto& c : model.covariates) grid << ',' << c;
    grid << ",predicted\n";
    for (Eigen::Index i = 0; i < g.lattice.rows(); ++i) {
        grid << format_double(g.lattice(i, 0)) << ',' << format_double(g.lattice(i, 1));
        for (Eigen::Index c = 0; c < g.lattice_covariates.cols(); ++c) grid << ',' << format_double(g.lattice_covariates(i, c));
        grid << ',' << format_double(g.lattice_predicted(i)) << '\n';
    }
    if (!grid) throw IoError("write to '" + grid_path + "' failed");

    const std::string res_path = out_prefix + "_residuals.csv";
    std::ofstream res(res_path);
    if (!res) throw IoError("cannot write '" + res_path + "'");
    res << "id,u,v,actual,predicted,residual\n";
    for (Eigen::Index i = 0; i < g.actual.size(); ++i)
        res << g.residual_ids[static_cast<std::size_t>(i)] << ',' << format_double(g.residual_coords(i, 0)) << ','
            << format_double(g.residual_coords(i, 1)) << ',' << format_double(g.actual(i)) << ','
            << format_double(g.predicted(i)) << ',' << format_double(g.residual(i)) << '\n';
    if (!res) throw IoError("write to '" + res_path + "' failed");
    return g;
}

}  // namespace cwr
