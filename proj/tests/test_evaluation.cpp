#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwr/evaluation.hpp"
#include "cwr/synthetic.hpp"

using namespace cwr;
namespace fs = std::filesystem;

namespace {

SyntheticConfig regime(Regime r, std::uint64_t seed, int n = 300) {
    SyntheticConfig c;
    c.regime = r;
    c.n = n;
    c.seed = seed;
    c.sigma = calibrate_sigma(c, 0.6);
    return c;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cwr_eval_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("improvement percentages") {
    CHECK(improvement_pct(100, 93) == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(improvement_pct(120.5, 95.38) == doctest::Approx(20.847).epsilon(1e-4));
    CHECK(improvement_pct(10, 12) == doctest::Approx(-20.0).epsilon(1e-12));
    CHECK(improvement_pct(5, 5) == 0.0);
    CHECK_THROWS_AS(improvement_pct(0, 1), ParameterError);
    CHECK_THROWS_AS(improvement_pct(-1, 1), ParameterError);
}

TEST_CASE("report internals are consistent") {
    const auto data = generate_synthetic(regime(Regime::attr, 3)).table;
    CompareConfig cfg;
    cfg.split.seed = 3;
    const auto rep = run_comparison(data, cfg, "attr3");
    REQUIRE(rep.results.size() == 4);
    CHECK(rep.train_size + static_cast<Eigen::Index>(rep.test_ids.size()) == data.size());
    CHECK(rep.covariates.size() == 2);
    REQUIRE(rep.importance.has_value());
    for (const auto& r : rep.results) {
        REQUIRE(r.ok);
        CHECK(r.test_rmse == rmse(rep.test_actual, r.predictions));
    }
    const auto imp = rep.improvements();
    for (const auto& a : rep.results)
        for (const auto& b : rep.results)
            if (a.kind != b.kind) CHECK(imp.at(display_name(a.kind)).at(display_name(b.kind)) == improvement_pct(b.test_rmse, a.test_rmse));
    const auto j = rep.to_json();
    CHECK(j["format"] == "cwr-comparison");
    CHECK(j["name"] == "attr3");
    CHECK(j["sizes"]["test"] == rep.test_ids.size());
    CHECK_FALSE(j["models"]["CWR"].contains("runtime_ms"));
    CHECK(j["config"]["split_algorithm"] == kSplitAlgorithm);
}

TEST_CASE("residual linkage") {
    const auto data = generate_synthetic(regime(Regime::geo, 4, 150)).table;
    CompareConfig cfg;
    cfg.models = {ModelKind::ols, ModelKind::gwr};
    const auto j = run_comparison(data, cfg).to_json();
    for (const auto& rec : j["records"]) {
        const double actual = rec["actual"];
        for (const auto& [model, p] : rec["predicted"].items())
            CHECK(actual - p.get<double>() == rec["residual"][model].get<double>());
    }
    const auto idx = split_indices(data.size(), cfg.split);
    CHECK(j["records"][0]["id"] == data.ids[static_cast<std::size_t>(idx.test[0])]);
}

TEST_CASE("a failing model does not stop the others") {
    const auto data = generate_synthetic(regime(Regime::geo, 5, 120)).table;
    CompareConfig cfg;
    cfg.models = {ModelKind::ols, ModelKind::cwr, ModelKind::gwr};
    cfg.model.rate = 1.5;  // invalid for CWR only
    const auto rep = run_comparison(data, cfg);
    CHECK(rep.result(ModelKind::ols)->ok);
    CHECK(rep.result(ModelKind::gwr)->ok);
    const auto* bad = rep.result(ModelKind::cwr);
    CHECK_FALSE(bad->ok);
    CHECK(bad->error_kind == "parameter");
    CHECK(rep.improvements().count("CWR") == 0);
    const auto j = rep.to_json();
    CHECK(j["models"]["CWR"]["status"] == "failed");
    CHECK(j["models"]["CWR"]["error"]["kind"] == "parameter");
    CHECK_FALSE(j["records"][0]["predicted"].contains("CWR"));
    CHECK(rep.result(ModelKind::lsboost) == nullptr);
}

TEST_CASE("local models beat OLS on spatially varying data") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto data = generate_synthetic(regime(Regime::geo, seed)).table;
        CompareConfig cfg;
        cfg.models = {ModelKind::ols, ModelKind::gwr, ModelKind::cwr};
        cfg.split.seed = seed;
        cfg.covariates = {kFloorArea, kHouseAge};
        const auto rep = run_comparison(data, cfg);
        const double ols = rep.result(ModelKind::ols)->test_rmse;
        wins += rep.result(ModelKind::gwr)->test_rmse < ols && rep.result(ModelKind::cwr)->test_rmse < ols;
    }
    CHECK(wins == 3);
}

TEST_CASE("CWR beats GWR when coefficients follow attributes") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto data = generate_synthetic(regime(Regime::attr, seed)).table;
        CompareConfig cfg;
        cfg.models = {ModelKind::gwr, ModelKind::cwr};
        cfg.split.seed = seed;
        cfg.covariates = {kFloorArea, kHouseAge};
        const auto rep = run_comparison(data, cfg);
        wins += rep.result(ModelKind::cwr)->test_rmse < rep.result(ModelKind::gwr)->test_rmse;
        CHECK(rep.result(ModelKind::cwr)->hyperparameters["rate"].get<double>() < 1.0);
    }
    CHECK(wins == 3);
}

TEST_CASE("comparison output is deterministic") {
    const auto data = generate_synthetic(regime(Regime::mixed, 8, 150)).table;
    CompareConfig cfg;
    cfg.split.seed = 8;
    CHECK(run_comparison(data, cfg, "m").to_json().dump() == run_comparison(data, cfg, "m").to_json().dump());
    cfg.timings = true;
    CHECK(run_comparison(data, cfg).to_json()["models"]["OLS"].contains("runtime_ms"));
}

TEST_CASE("explicit covariates bypass factor selection") {
    const auto data = generate_synthetic(regime(Regime::attr, 2, 100)).table;
    CompareConfig cfg;
    cfg.models = {ModelKind::ols};
    cfg.covariates = {kHouseAge};
    const auto rep = run_comparison(data, cfg);
    CHECK(rep.covariates == std::vector<std::string>{kHouseAge});
    CHECK_FALSE(rep.importance.has_value());
    cfg.covariates.clear();
    cfg.top_k = 0;
    CHECK(run_comparison(data, cfg).covariates == data.covariate_names);
}

TEST_CASE("map export") {
    const auto data = generate_synthetic(regime(Regime::geo, 6, 100)).table;
    const auto [train, test] = split(data, SplitSpec{});
    ModelConfig mc;
    mc.kind = ModelKind::gwr;
    mc.covariates = {kFloorArea, kHouseAge};
    const auto model = train_model(train, mc);
    const auto dir = scratch("maps");
    const auto g = export_maps(model, train, test, LatticeSpec{2, 2}, (dir / "m").string());
    CHECK(g.lattice.rows() == 4);
    CHECK(g.lattice.col(0).minCoeff() == train.coords.col(0).minCoeff());
    CHECK(g.lattice.col(1).maxCoeff() == train.coords.col(1).maxCoeff());
    const auto grid = read_lines(dir / "m_grid.csv");
    REQUIRE(grid.size() == 5);
    CHECK(grid[0] == "u,v,floor_area,house_age,predicted");
    const auto res = read_lines(dir / "m_residuals.csv");
    CHECK(res.size() == static_cast<std::size_t>(test.size()) + 1);
    CHECK(res[0] == "id,u,v,actual,predicted,residual");
    CHECK(g.residual == test.response - g.predicted);
    CHECK(build_maps(model, train, test, LatticeSpec{1, 1}).lattice(0, 0) ==
          (train.coords.col(0).minCoeff() + train.coords.col(0).maxCoeff()) / 2);
    CHECK_THROWS_AS(export_maps(model, train, test, LatticeSpec{2, 2}, "/nonexistent/dir/m"), IoError);
    CHECK_THROWS_AS(build_maps(model, train, test, LatticeSpec{0, 2}), ParameterError);
    fs::remove_all(dir);
}

TEST_CASE("noiseless lattice predictions track the true surface") {
    SyntheticConfig c;
    c.regime = Regime::geo;
    c.n = 400;
    c.seed = 10;
    const auto data = generate_synthetic(c).table;
    const auto [train, test] = split(data, SplitSpec{0.8, 10});
    ModelConfig mc;
    mc.kind = ModelKind::gwr;
    mc.covariates = {kFloorArea, kHouseAge};
    const auto g = build_maps(train_model(train, mc), train, test, LatticeSpec{12, 12});
    // Aggregate error over the lattice; single nodes near the boundary carry
    // smoothing bias of up to about 14%.
    Vector truth(g.lattice.rows());
    std::vector<double> rel;
    for (Eigen::Index i = 0; i < g.lattice.rows(); ++i) {
        truth(i) = true_price(c, g.lattice(i, 0), g.lattice(i, 1), g.lattice_covariates(i, 0), g.lattice_covariates(i, 1));
        rel.push_back(std::abs(g.lattice_predicted(i) - truth(i)) / std::abs(truth(i)));
    }
    std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2), rel.end());
    CHECK((g.lattice_predicted - truth).norm() / truth.norm() <= 0.05);
    CHECK(rel[rel.size() / 2] <= 0.05);
}

TEST_CASE("saved models predict identically after loading") {
    const auto data = generate_synthetic(regime(Regime::attr, 7, 120)).table;
    const auto [train, test] = split(data, SplitSpec{});
    const auto dir = scratch("models");
    for (ModelKind k : {ModelKind::ols, ModelKind::gwr, ModelKind::cwr, ModelKind::lsboost}) {
        ModelConfig mc;
        mc.kind = k;
        mc.covariates = {kFloorArea, kHouseAge};
        const auto model = train_model(train, mc);
        const auto path = (dir / (to_string(k) + ".json")).string();
        model.save(path);
        const auto back = FittedModel::load(path);
        CHECK(back.kind == k);
        CHECK(back.predict(test) == model.predict(test));
        CHECK(back.hyperparameters() == model.hyperparameters());
    }
    {
        ModelConfig mc;
        mc.kind = ModelKind::cwr;
        mc.covariates = {kFloorArea, kHouseAge};
        mc.prediction.kind = PredictionKind::local_fit;
        const auto model = train_model(train, mc);
        CHECK(FittedModel::from_json(model.to_json()).predict(test) == model.predict(test));
    }
    CHECK_THROWS_AS(FittedModel::load((dir / "missing.json").string()), IoError);
    std::ofstream(dir / "bad.json") << "{\"format\": \"something-else\"}";
    CHECK_THROWS(FittedModel::load((dir / "bad.json").string()));
    fs::remove_all(dir);
}

TEST_CASE("batch manifest") {
    const auto dir = scratch("batch");
    for (std::uint64_t seed : {1, 2}) {
        auto c = regime(seed == 1 ? Regime::geo : Regime::attr, seed, 100);
        const auto d = generate_synthetic(c);
        write_csv((dir / ("d" + std::to_string(seed) + ".csv")).string(), d.table, synthetic_schema(c));
    }
    synthetic_schema(SyntheticConfig{}).save((dir / "schema.json").string());
    std::ofstream(dir / "manifest.json") << R"({"cases": [
        {"name": "geo", "data": "d1.csv", "schema": "schema.json", "seed": 1},
        {"name": "attr", "data": "d2.csv", "schema": "schema.json", "seed": 2, "train_frac": 0.75}]})";
    CompareConfig base;
    base.models = {ModelKind::ols, ModelKind::gwr, ModelKind::cwr};
    const auto out = run_batch((dir / "manifest.json").string(), base);
    CHECK(out["cases"].size() == 2);
    CHECK(out["cases"]["attr"]["sizes"]["train"] == 75);
    CHECK(out["summary"]["rmse"]["geo"]["OLS"].is_number());
    CHECK(out["summary"]["cwr_rate"]["attr"].is_number());
    CHECK(out["summary"]["cwr_improvement_over_gwr_pct"]["geo"].is_number());
    CHECK(out.dump() == run_batch((dir / "manifest.json").string(), base).dump());
    std::ofstream(dir / "broken.json") << R"({"cases": [{"name": "x"}]})";
    CHECK_THROWS(run_batch((dir / "broken.json").string(), base));
    fs::remove_all(dir);
}
