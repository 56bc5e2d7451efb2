#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwr/local_model.hpp"
#include "cwr/table.hpp"
#include "cwr/tree.hpp"

namespace cwr {

enum class ModelKind { ols, gwr, cwr, lsboost };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
/// Upper-case display name used in reports ("OLS", "GWR", "CWR", "LSBoost").
std::string display_name(ModelKind k);

/// Everything needed to train one model on a table.
struct ModelConfig {
    ModelKind kind = ModelKind::cwr;
    std::vector<std::string> covariates;         // regression covariates (required)
    std::vector<std::string> attribute_columns;  // CWR attribute distance; empty means non-dummy covariates
    std::optional<double> rate;                  // CWR: fixed blend rate; empty means linear search
    std::optional<double> bandwidth;             // GWR/CWR: fixed bandwidth; empty means CV
    std::vector<double> rates = default_rate_grid();
    PredictionMode prediction;
    bool strict_paper_scoring = false;  // score the blend rate by in-sample RMSE
    Normalization normalization = Normalization::max_scale;
    BoostOptions boost;
};

/// A trained OLS, GWR, CWR or LSBoost model. Local models keep their
/// training data because predictions need the training locations.
struct FittedModel {
    static constexpr int kFormatVersion = 1;

    ModelKind kind = ModelKind::ols;
    std::vector<std::string> covariates;

    Vector beta;                            // OLS
    std::optional<RegressionData> training;  // GWR / CWR
    std::optional<LocalFit> local;
    PredictionMode prediction;
    std::optional<BoostedEnsemble> boost;  // LSBoost

    Vector predict(const ObservationTable& queries) const;
    Vector predict(const Coordinates& coords, const Matrix& raw_covariates) const;

    /// Selected hyperparameters only (bandwidth, rate, K, ...).
    nlohmann::json hyperparameters() const;

    /// Versioned document: hyperparameters, coefficient matrix, search
    /// traces and the training block needed for prediction.
    nlohmann::json to_json() const;
    static FittedModel from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static FittedModel load(const std::string& path);
};

FittedModel train_model(const ObservationTable& train, const ModelConfig& config);

nlohmann::json to_json(const HyperSearchTrace& trace);
HyperSearchTrace trace_from_json(const nlohmann::json& j);

}  // namespace cwr
