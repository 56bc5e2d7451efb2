// Command-line front end: synth, importance, fit, predict, compare, map.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cwr/error.hpp"
#include "cwr/evaluation.hpp"
#include "cwr/model.hpp"
#include "cwr/synthetic.hpp"
#include "cwr/table.hpp"
#include "cwr/tree.hpp"

namespace {

using nlohmann::json;

struct DataArgs {
    std::string data;
    std::string schema;
};

struct ModelArgs {
    std::string model = "cwr";
    std::string rate = "search";
    std::string bandwidth = "cv";
    int knn = 3;
    std::string predict_mode = "knn-coef";
    bool strict = false;
    std::string normalization = "max-scale";
    std::vector<std::string> covariates;
    std::vector<std::string> attributes;
    int top_k = 2;
    int trees = 100;
    double shrinkage = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
};

struct SplitArgs {
    std::uint64_t seed = 0;
    double train_frac = 0.8;
};

std::optional<double> parse_number_or(const std::string& text, const std::string& keyword, const std::string& flag) {
    if (text == keyword) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw cwr::ParameterError(flag + " expects a number or '" + keyword + "', got '" + text + "'");
}

void add_data_options(CLI::App* app, DataArgs& a, bool data_required = true) {
    app->add_option("--data", a.data, "input CSV")->required(data_required);
    app->add_option("--schema", a.schema, "schema JSON")->required();
}

void add_split_options(CLI::App* app, SplitArgs& a) {
    app->add_option("--seed", a.seed, "split seed")->capture_default_str();
    app->add_option("--train-frac", a.train_frac, "training fraction")->capture_default_str();
}

void add_model_options(CLI::App* app, ModelArgs& a, bool with_kind) {
    if (with_kind)
        app->add_option("--model", a.model, "ols|gwr|cwr|lsboost")->capture_default_str();
    app->add_option("--r", a.rate, "blend rate in [0, 1] or 'search'")->capture_default_str();
    app->add_option("--bandwidth", a.bandwidth, "kernel bandwidth or 'cv'")->capture_default_str();
    app->add_option("--knn", a.knn, "neighbors averaged by knn-coef prediction")->capture_default_str();
    app->add_option("--predict-mode", a.predict_mode, "knn-coef|local-fit")->capture_default_str();
    app->add_flag("--strict-paper-scoring", a.strict, "score the blend rate by in-sample RMSE");
    app->add_option("--normalization", a.normalization, "max-scale|none")->capture_default_str();
    app->add_option("--covariates", a.covariates, "regression covariates (skips factor selection)")->delimiter(',');
    app->add_option("--attributes", a.attributes, "attribute-distance columns")->delimiter(',');
    app->add_option("--top-k", a.top_k, "covariates kept by factor selection; 0 keeps all")->capture_default_str();
    app->add_option("--trees", a.trees, "LSBoost tree count")->capture_default_str();
    app->add_option("--shrinkage", a.shrinkage, "LSBoost shrinkage")->capture_default_str();
    app->add_option("--max-depth", a.max_depth, "LSBoost tree depth")->capture_default_str();
    app->add_option("--min-leaf", a.min_leaf, "LSBoost minimum leaf size")->capture_default_str();
}

cwr::ModelConfig model_config(const ModelArgs& a) {
    cwr::ModelConfig c;
    c.kind = cwr::model_kind_from_string(a.model);
    c.attribute_columns = a.attributes;
    c.rate = parse_number_or(a.rate, "search", "--r");
    c.bandwidth = parse_number_or(a.bandwidth, "cv", "--bandwidth");
    c.prediction.k = a.knn;
    c.prediction.kind = cwr::prediction_kind_from_string(a.predict_mode);
    c.strict_paper_scoring = a.strict;
    if (a.normalization == "max-scale")
        c.normalization = cwr::Normalization::max_scale;
    else if (a.normalization == "none")
        c.normalization = cwr::Normalization::none;
    else
        throw cwr::ParameterError("--normalization expects max-scale or none, got '" + a.normalization + "'");
    c.boost = {a.trees, a.shrinkage, a.max_depth, a.min_leaf};
    if (a.knn < 1) throw cwr::ParameterError("--knn must be at least 1");
    return c;
}

cwr::LoadResult load(const DataArgs& a, bool require_response = true) {
    const auto schema = cwr::Schema::load(a.schema);
    auto result = cwr::load_csv(a.data, schema, {require_response});
    for (const auto& r : result.report.rejected)
        std::cerr << "warning: line " << r.line << " rejected: " << r.reason << '\n';
    return result;
}

/// Explicit covariates, or the top_k by LSBoost importance on `train`.
std::vector<std::string> regression_covariates(const cwr::ObservationTable& train, const ModelArgs& a,
                                               const cwr::BoostOptions& boost) {
    if (!a.covariates.empty()) return a.covariates;
    if (a.top_k == 0) return train.covariate_names;
    const auto e = cwr::fit_lsboost(train.covariates, train.response, boost, train.covariate_names);
    return cwr::select_factors(cwr::predictor_importance(e), std::min<int>(a.top_k, static_cast<int>(train.covariate_count())));
}

void write_json(const json& j, const std::string& path) {
    if (path.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw cwr::IoError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw cwr::IoError("write to '" + path + "' failed");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw cwr::IoError("cannot write '" + path + "'");
    return out;
}

int fail(const std::string& kind, const std::string& message, int code = 1) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariate-distance weighted regression toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_config, synth_regime = "geo", synth_out, synth_schema_out, synth_truth_out;
    int synth_n = 400;
    double synth_sigma = 0.0, synth_r2 = 0.0;
    std::uint64_t synth_seed = 0;
    bool synth_land_use = false;
    synth->add_option("--config", synth_config, "generator config JSON; --regime, --n, --sigma, --seed and --land-use are then ignored");
    synth->add_option("--regime", synth_regime, "geo|attr|mixed")->capture_default_str();
    synth->add_option("--n", synth_n, "record count")->capture_default_str();
    synth->add_option("--sigma", synth_sigma, "noise standard deviation")->capture_default_str();
    synth->add_option("--target-r2", synth_r2, "calibrate sigma so OLS reaches this R^2");
    synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth->add_flag("--land-use", synth_land_use, "emit a categorical land-use column");
    synth->add_option("--out", synth_out, "output CSV")->required();
    synth->add_option("--schema-out", synth_schema_out, "write the matching schema JSON");
    synth->add_option("--truth-out", synth_truth_out, "write ground-truth coefficients CSV");

    // importance
    auto* importance = app.add_subcommand("importance", "rank covariates by LSBoost importance");
    DataArgs imp_data;
    ModelArgs imp_model;
    SplitArgs imp_split;
    bool imp_full = false;
    std::string imp_out, imp_json;
    add_data_options(importance, imp_data);
    add_split_options(importance, imp_split);
    importance->add_flag("--all-rows", imp_full, "rank on every record instead of the training partition");
    importance->add_option("--trees", imp_model.trees)->capture_default_str();
    importance->add_option("--shrinkage", imp_model.shrinkage)->capture_default_str();
    importance->add_option("--max-depth", imp_model.max_depth)->capture_default_str();
    importance->add_option("--min-leaf", imp_model.min_leaf)->capture_default_str();
    importance->add_option("--out", imp_out, "ranking CSV (stdout when omitted)");
    importance->add_option("--json", imp_json, "ranking JSON");

    // fit
    auto* fit = app.add_subcommand("fit", "train one model on every record of a file");
    DataArgs fit_data;
    ModelArgs fit_model;
    std::string fit_out;
    add_data_options(fit, fit_data);
    add_model_options(fit, fit_model, true);
    fit->add_option("--out", fit_out, "model JSON")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "score a query file with a saved model");
    DataArgs pred_data;
    std::string pred_model, pred_out;
    add_data_options(predict, pred_data);
    predict->add_option("--model-file", pred_model, "model JSON written by fit")->required();
    predict->add_option("--out", pred_out, "predictions CSV (stdout when omitted)");

    // compare
    auto* compare = app.add_subcommand("compare", "train/test comparison of OLS, GWR, CWR and LSBoost");
    DataArgs cmp_data;
    ModelArgs cmp_model;
    SplitArgs cmp_split;
    std::string cmp_manifest, cmp_out;
    std::vector<std::string> cmp_models{"ols", "gwr", "cwr", "lsboost"};
    bool cmp_timings = false;
    compare->add_option("--data", cmp_data.data, "input CSV");
    compare->add_option("--schema", cmp_data.schema, "schema JSON");
    compare->add_option("--manifest", cmp_manifest, "batch manifest JSON");
    add_split_options(compare, cmp_split);
    add_model_options(compare, cmp_model, false);
    compare->add_option("--models", cmp_models, "models to run")->delimiter(',')->capture_default_str();
    compare->add_flag("--timings", cmp_timings, "include wall-clock runtimes");
    compare->add_option("--out", cmp_out, "report JSON (stdout when omitted)");

    // map
    auto* map = app.add_subcommand("map", "export a prediction lattice and test residuals");
    DataArgs map_data;
    ModelArgs map_model;
    SplitArgs map_split;
    cwr::LatticeSpec lattice;
    std::string map_out;
    add_data_options(map, map_data);
    add_split_options(map, map_split);
    add_model_options(map, map_model, true);
    map->add_option("--cells-u", lattice.cells_u, "lattice nodes along u")->capture_default_str();
    map->add_option("--cells-v", lattice.cells_v, "lattice nodes along v")->capture_default_str();
    map->add_option("--out", map_out, "output prefix for _grid.csv and _residuals.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (*synth) {
            cwr::SyntheticConfig cfg;
            if (!synth_config.empty()) {
                std::ifstream in(synth_config);
                if (!in) throw cwr::IoError("cannot open '" + synth_config + "'");
                json j;
                try {
                    j = json::parse(in);
                } catch (const json::parse_error& e) {
                    throw cwr::InputError("config is not valid JSON: " + std::string(e.what()));
                }
                cfg = cwr::SyntheticConfig::from_json(j);
            } else {
                cfg.regime = cwr::regime_from_string(synth_regime);
                cfg.n = synth_n;
                cfg.sigma = synth_sigma;
                cfg.seed = synth_seed;
                cfg.land_use = synth_land_use;
            }
            if (synth->count("--target-r2")) cfg.sigma = cwr::calibrate_sigma(cfg, synth_r2);
            const auto data = cwr::generate_synthetic(cfg);
            const auto schema = cwr::synthetic_schema(cfg);
            cwr::write_csv(synth_out, data.table, schema);
            if (!synth_schema_out.empty()) schema.save(synth_schema_out);
            if (!synth_truth_out.empty()) {
                auto out = open_out(synth_truth_out);
                out << "id";
                for (const auto& n : data.coefficient_names) out << ',' << n;
                out << ",true_price\n";
                for (Eigen::Index i = 0; i < data.table.size(); ++i) {
                    out << data.table.ids[static_cast<std::size_t>(i)];
                    for (Eigen::Index c = 0; c < data.true_coefficients.cols(); ++c)
                        out << ',' << cwr::format_double(data.true_coefficients(i, c));
                    out << ',' << cwr::format_double(data.true_price(i)) << '\n';
                }
            }
            std::cerr << "sigma " << cwr::format_double(cfg.sigma) << '\n';
        } else if (*importance) {
            const auto loaded = load(imp_data);
            const auto train = imp_full ? loaded.table : cwr::split(loaded.table, {imp_split.train_frac, imp_split.seed}).first;
            const cwr::BoostOptions boost{imp_model.trees, imp_model.shrinkage, imp_model.max_depth, imp_model.min_leaf};
            const auto report =
                cwr::predictor_importance(cwr::fit_lsboost(train.covariates, train.response, boost, train.covariate_names));
            if (imp_out.empty()) {
                report.write_csv(std::cout);
            } else {
                auto out = open_out(imp_out);
                report.write_csv(out);
            }
            if (!imp_json.empty()) write_json(report.to_json(), imp_json);
        } else if (*fit) {
            const auto loaded = load(fit_data);
            auto cfg = model_config(fit_model);
            cfg.covariates = regression_covariates(loaded.table, fit_model, cfg.boost);
            cwr::train_model(loaded.table, cfg).save(fit_out);
        } else if (*predict) {
            const auto model = cwr::FittedModel::load(pred_model);
            const auto loaded = load(pred_data, false);
            const auto& q = loaded.table;
            const cwr::Vector p = model.predict(q);
            std::ofstream file;
            if (!pred_out.empty()) file = open_out(pred_out);
            std::ostream& out = pred_out.empty() ? std::cout : file;
            out << "id,u,v,predicted" << (q.has_response ? ",actual,residual" : "") << '\n';
            for (Eigen::Index i = 0; i < q.size(); ++i) {
                out << q.ids[static_cast<std::size_t>(i)] << ',' << cwr::format_double(q.coords(i, 0)) << ','
                    << cwr::format_double(q.coords(i, 1)) << ',' << cwr::format_double(p(i));
                if (q.has_response)
                    out << ',' << cwr::format_double(q.response(i)) << ',' << cwr::format_double(q.response(i) - p(i));
                out << '\n';
            }
        } else if (*compare) {
            cwr::CompareConfig cfg;
            cfg.models.clear();
            for (const auto& m : cmp_models) cfg.models.push_back(cwr::model_kind_from_string(m));
            cfg.split = {cmp_split.train_frac, cmp_split.seed};
            cfg.top_k = cmp_model.top_k;
            cfg.covariates = cmp_model.covariates;
            cfg.model = model_config(cmp_model);
            cfg.timings = cmp_timings;
            if (!cmp_manifest.empty()) {
                write_json(cwr::run_batch(cmp_manifest, cfg), cmp_out);
            } else {
                if (cmp_data.data.empty() || cmp_data.schema.empty())
                    throw cwr::ParameterError("compare needs --data and --schema, or --manifest");
                const auto loaded = load(cmp_data);
                write_json(cwr::run_comparison(loaded.table, cfg, cmp_data.data).to_json(), cmp_out);
            }
        } else if (*map) {
            const auto loaded = load(map_data);
            const auto [train, test] = cwr::split(loaded.table, {map_split.train_frac, map_split.seed});
            auto cfg = model_config(map_model);
            cfg.covariates = regression_covariates(train, map_model, cfg.boost);
            const auto model = cwr::train_model(train, cfg);
            cwr::export_maps(model, train, test, lattice, map_out);
        }
    } catch (const cwr::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return EXIT_SUCCESS;
}
