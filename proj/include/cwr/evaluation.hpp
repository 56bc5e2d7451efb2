#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwr/model.hpp"
#include "cwr/table.hpp"
#include "cwr/tree.hpp"
#include "cwr/wls.hpp"

namespace cwr {

/// (baseline - model) / baseline * 100; negative when the model is worse.
double improvement_pct(double baseline_rmse, double model_rmse);

struct CompareConfig {
    std::vector<ModelKind> models{ModelKind::ols, ModelKind::gwr, ModelKind::cwr, ModelKind::lsboost};
    SplitSpec split;
    /// Factor selection keeps this many covariates ranked by LSBoost
    /// importance on the training partition; 0 disables selection.
    int top_k = 2;
    /// Explicit regression covariates; overrides factor selection.
    std::vector<std::string> covariates;
    /// Options shared by all models; `kind` and `covariates` are filled in per model.
    ModelConfig model;
    /// Include wall-clock runtimes. Off by default so reports are reproducible byte for byte.
    bool timings = false;
};

struct ModelResult {
    ModelKind kind = ModelKind::ols;
    bool ok = false;
    std::string error_kind;
    std::string error_message;
    double test_rmse = 0.0;
    double train_rmse = 0.0;
    nlohmann::json hyperparameters;
    Vector predictions;  // on the test partition
    double runtime_ms = 0.0;
};

/// Outcome of one train/test comparison across models.
struct ComparisonReport {
    std::string name;
    CompareConfig config;
    std::vector<std::string> covariates;
    std::optional<ImportanceReport> importance;
    Eigen::Index train_size = 0;
    std::vector<std::string> test_ids;
    Coordinates test_coords;
    Vector test_actual;
    std::vector<ModelResult> results;

    const ModelResult* result(ModelKind k) const;
    /// improvement[A][B]: percent by which model A improves on baseline B,
    /// over successfully fitted models.
    std::map<std::string, std::map<std::string, double>> improvements() const;
    nlohmann::json to_json() const;
};

ComparisonReport run_comparison(const ObservationTable& data, const CompareConfig& config, std::string name = "");

/// Runs every case of a manifest
///   {"cases": [{"name": "...", "data": "file.csv", "schema": "schema.json",
///               "seed": 1, "train_frac": 0.8}, ...]}
/// (relative paths resolve against the manifest's directory) and returns
/// {"cases": {name: report}, "summary": {"rmse": {name: {model: rmse}}, ...}}.
nlohmann::json run_batch(const std::string& manifest_path, const CompareConfig& base);

struct LatticeSpec {
    int cells_u = 50;
    int cells_v = 50;
};

/// Prediction lattice over the training bounding box and test residuals.
struct GridExport {
    Coordinates lattice;
    Matrix lattice_covariates;
    Vector lattice_predicted;
    std::vector<std::string> residual_ids;
    Coordinates residual_coords;
    Vector actual;
    Vector predicted;
    Vector residual;  // actual - predicted
};

/// Lattice nodes span [min, max] of the training coordinates on each axis
/// (a single node sits at the center). Lattice covariates are the per-column
/// training medians.
GridExport build_maps(const FittedModel& model, const ObservationTable& train, const ObservationTable& test,
                      const LatticeSpec& lattice);

/// Writes `<out_prefix>_grid.csv` (u, v, covariates..., predicted) and
/// `<out_prefix>_residuals.csv` (id, u, v, actual, predicted, residual).
GridExport export_maps(const FittedModel& model, const ObservationTable& train, const ObservationTable& test,
                       const LatticeSpec& lattice, const std::string& out_prefix);

}  // namespace cwr
