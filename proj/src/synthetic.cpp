#include "cwr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cwr {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::geo: return "GEO";
        case Regime::attr: return "ATTR";
        case Regime::mixed: return "MIXED";
    }
    return "?";
}

Regime regime_from_string(const std::string& s) {
    std::string up = s;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (up == "GEO") return Regime::geo;
    if (up == "ATTR") return Regime::attr;
    if (up == "MIXED") return Regime::mixed;
    throw ParameterError("unknown regime '" + s + "' (expected GEO, ATTR or MIXED)");
}

std::vector<AttributeClass> SyntheticConfig::default_classes() {
    // new high-rise, mid-age, old walk-up
    return {{0.0, 8.0, 150.0, 14.0, -12.0}, {14.0, 24.0, 350.0, 7.0, -6.0}, {30.0, 45.0, 500.0, 3.0, -3.0}};
}

nlohmann::json SyntheticConfig::to_json() const {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& c : classes)
        cls.push_back({{"age_lo", c.age_lo},
                       {"age_hi", c.age_hi},
                       {"intercept", c.intercept},
                       {"area_slope", c.area_slope},
                       {"age_slope", c.age_slope}});
    return {{"regime", to_string(regime)},
            {"n", n},
            {"sigma", sigma},
            {"seed", seed},
            {"extent", extent},
            {"mix", mix},
            {"land_use", land_use},
            {"area_range", {area_lo, area_hi}},
            {"surface",
             {{"intercept_base", surface.intercept_base},
              {"intercept_amp", surface.intercept_amp},
              {"area_base", surface.area_base},
              {"area_amp", surface.area_amp},
              {"age_base", surface.age_base},
              {"age_amp", surface.age_amp}}},
            {"classes", cls}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    try {
        c.regime = regime_from_string(j.at("regime").get<std::string>());
        c.n = j.value("n", c.n);
        c.sigma = j.value("sigma", c.sigma);
        c.seed = j.value("seed", c.seed);
        c.extent = j.value("extent", c.extent);
        c.mix = j.value("mix", c.mix);
        c.land_use = j.value("land_use", c.land_use);
        if (j.contains("area_range")) {
            c.area_lo = j["area_range"].at(0).get<double>();
            c.area_hi = j["area_range"].at(1).get<double>();
        }
        if (j.contains("surface")) {
            const auto& s = j["surface"];
            c.surface.intercept_base = s.value("intercept_base", c.surface.intercept_base);
            c.surface.intercept_amp = s.value("intercept_amp", c.surface.intercept_amp);
            c.surface.area_base = s.value("area_base", c.surface.area_base);
            c.surface.area_amp = s.value("area_amp", c.surface.area_amp);
            c.surface.age_base = s.value("age_base", c.surface.age_base);
            c.surface.age_amp = s.value("age_amp", c.surface.age_amp);
        }
        if (j.contains("classes")) {
            c.classes.clear();
            for (const auto& k : j["classes"])
                c.classes.push_back({k.at("age_lo").get<double>(), k.at("age_hi").get<double>(),
                                     k.at("intercept").get<double>(), k.at("area_slope").get<double>(),
                                     k.at("age_slope").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed synthetic config: ") + e.what());
    }
    return c;
}

namespace {

void check_config(const SyntheticConfig& c) {
    if (c.n < 20) throw ParameterError("synthetic generator needs n >= 20, got " + std::to_string(c.n));
    if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw ParameterError("sigma must be finite and nonnegative");
    if (!(c.extent > 0.0)) throw ParameterError("extent must be positive");
    if (!(c.mix >= 0.0 && c.mix <= 1.0)) throw ParameterError("mix must lie in [0, 1]");
    if (!(c.area_hi > c.area_lo)) throw ParameterError("floor area range is empty");
    if (c.classes.empty()) throw ParameterError("at least one attribute class is required");
    for (const auto& k : c.classes)
        if (!(k.age_hi > k.age_lo)) throw ParameterError("attribute class has an empty age band");
}

std::size_t class_of(const SyntheticConfig& c, double age) {
    // Bands may leave gaps; a house belongs to the class whose band is nearest.
    std::size_t best = 0;
    double best_gap = INFINITY;
    for (std::size_t k = 0; k < c.classes.size(); ++k) {
        const auto& cl = c.classes[k];
        const double gap = age < cl.age_lo ? cl.age_lo - age : (age >= cl.age_hi ? age - cl.age_hi : 0.0);
        if (gap < best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

Eigen::Vector3d geo_coefficients(const SyntheticConfig& c, double u, double v) {
    using std::numbers::pi;
    const double a = u / c.extent;
    const double b = v / c.extent;
    const auto& s = c.surface;
    return {s.intercept_base + s.intercept_amp * std::sin(pi * a) * std::cos(pi * b),
            s.area_base + s.area_amp * std::sin(pi * a) * std::sin(pi * b), s.age_base + s.age_amp * std::cos(pi * b)};
}

}  // namespace

Eigen::Vector3d true_coefficients(const SyntheticConfig& c, double u, double v, double house_age) {
    const auto& cl = c.classes[class_of(c, house_age)];
    const Eigen::Vector3d attr(cl.intercept, cl.area_slope, cl.age_slope);
    switch (c.regime) {
        case Regime::geo: return geo_coefficients(c, u, v);
        case Regime::attr: return attr;
        case Regime::mixed: return c.mix * geo_coefficients(c, u, v) + (1.0 - c.mix) * attr;
    }
    return attr;
}

double true_price(const SyntheticConfig& c, double u, double v, double floor_area, double house_age) {
    const Eigen::Vector3d beta = true_coefficients(c, u, v, house_age);
    return beta(0) + beta(1) * floor_area + beta(2) * house_age;
}

Schema synthetic_schema(const SyntheticConfig& config) {
    Schema s;
    s.columns = {{"id", ColumnRole::id, ""},
                 {"u", ColumnRole::coordinate_u, "m"},
                 {"v", ColumnRole::coordinate_v, "m"},
                 {"price", ColumnRole::response, "10k NTD"},
                 {kFloorArea, ColumnRole::covariate, "m2"},
                 {kHouseAge, ColumnRole::covariate, "years"}};
    for (const auto& p : poi_columns()) s.columns.push_back({p, ColumnRole::covariate, "m"});
    if (config.land_use) s.columns.push_back({"land_use", ColumnRole::dummy_source, ""});
    return s;
}

SyntheticData generate_synthetic(const SyntheticConfig& c) {
    check_config(c);
    Rng rng(c.seed);
    const auto& pois = poi_columns();

    std::vector<std::vector<Eigen::Vector2d>> sites(pois.size());
    for (std::size_t k = 0; k < pois.size(); ++k) {
        const std::size_t count = 1 + k % 3;
        for (std::size_t s = 0; s < count; ++s) {
            const double su = rng.uniform(0.0, c.extent);
            const double sv = rng.uniform(0.0, c.extent);
            sites[k].emplace_back(su, sv);
        }
    }

    static const std::vector<std::string> land_levels{"commercial", "industrial", "residential"};
    const Eigen::Index n = c.n;
    const auto n_cov = static_cast<Eigen::Index>(2 + pois.size());

    SyntheticData out;
    auto& t = out.table;
    t.coords.resize(n, 2);
    t.response.resize(n);
    t.covariates.resize(n, n_cov);
    t.covariate_names = {kFloorArea, kHouseAge};
    t.covariate_names.insert(t.covariate_names.end(), pois.begin(), pois.end());
    t.dummy.assign(t.covariate_names.size(), false);
    out.coefficient_names = {"intercept"};
    out.coefficient_names.insert(out.coefficient_names.end(), t.covariate_names.begin(), t.covariate_names.end());
    out.true_coefficients = Matrix::Zero(n, n_cov + 1);
    out.true_price.resize(n);

    CategoricalColumn land{"land_use", {}, {}};
    const std::size_t width = std::to_string(c.n).size();

    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = rng.uniform(0.0, c.extent);
        const double v = rng.uniform(0.0, c.extent);
        const auto& cl = c.classes[rng.below(c.classes.size())];
        const double age = rng.uniform(cl.age_lo, cl.age_hi);
        const double area = rng.uniform(c.area_lo, c.area_hi);
        if (c.land_use) land.values.push_back(land_levels[rng.below(land_levels.size())]);
        const double noise = c.sigma > 0.0 ? c.sigma * rng.normal() : 0.0;

        const std::string num = std::to_string(i + 1);
        t.ids.push_back("r" + std::string(width - num.size(), '0') + num);
        t.coords(i, 0) = u;
        t.coords(i, 1) = v;
        t.covariates(i, 0) = area;
        t.covariates(i, 1) = age;
        for (std::size_t k = 0; k < pois.size(); ++k) {
            double best = INFINITY;
            for (const auto& s : sites[k]) best = std::min(best, std::hypot(u - s.x(), v - s.y()));
            t.covariates(i, static_cast<Eigen::Index>(2 + k)) = best;
        }
        const Eigen::Vector3d beta = true_coefficients(c, u, v, age);
        out.true_coefficients.row(i).head<3>() = beta.transpose();
        out.true_price(i) = beta(0) + beta(1) * area + beta(2) * age;
        t.response(i) = out.true_price(i) + noise;
    }

    if (c.land_use) {
        land.levels = land_levels;
        for (std::size_t l = 1; l < land_levels.size(); ++l) {
            t.covariate_names.push_back("land_use=" + land_levels[l]);
            t.dummy.push_back(true);
        }
        Matrix dummies(n, static_cast<Eigen::Index>(land_levels.size() - 1));
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::size_t l = 1; l < land_levels.size(); ++l)
                dummies(i, static_cast<Eigen::Index>(l - 1)) = land.values[static_cast<std::size_t>(i)] == land_levels[l] ? 1.0 : 0.0;
        Matrix widened(n, t.covariates.cols() + dummies.cols());
        widened << t.covariates, dummies;
        t.covariates = std::move(widened);
        Matrix coef = Matrix::Zero(n, out.true_coefficients.cols() + dummies.cols());
        coef.leftCols(out.true_coefficients.cols()) = out.true_coefficients;
        out.true_coefficients = std::move(coef);
        out.coefficient_names.push_back("land_use=industrial");
        out.coefficient_names.push_back("land_use=residential");
        t.categoricals.push_back(std::move(land));
    }
    t.validate();
    return out;
}

double calibrate_sigma(SyntheticConfig config, double target_r2) {
    if (!(target_r2 > 0.0 && target_r2 < 1.0)) throw ParameterError("target R^2 must lie in (0, 1)");
    config.sigma = 0.0;
    const auto data = generate_synthetic(config);
    const Matrix X = data.table.design({kFloorArea, kHouseAge});
    const Vector& y = data.table.response;
    const Vector beta = fit_ols(X, y);
    const double s2 = (y.array() - y.mean()).square().mean();
    const double e2 = (y - X * beta).squaredNorm() / static_cast<double>(y.size());
    const double sigma2 = (s2 - e2) / target_r2 - s2;
    return sigma2 > 0.0 ? std::sqrt(sigma2) : 0.0;
}

}  // namespace cwr
