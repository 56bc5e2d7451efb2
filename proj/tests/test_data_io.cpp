#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cwr/synthetic.hpp"
#include "cwr/table.hpp"
#include "cwr/wls.hpp"

using namespace cwr;

namespace {

Schema small_schema() {
    Schema s;
    s.columns = {{"id", ColumnRole::id, ""},
                 {"u", ColumnRole::coordinate_u, "m"},
                 {"v", ColumnRole::coordinate_v, "m"},
                 {"price", ColumnRole::response, ""},
                 {"floor_area", ColumnRole::covariate, "m2"},
                 {"house_age", ColumnRole::covariate, "years"}};
    return s;
}

LoadResult parse(const std::string& text, const Schema& s = small_schema(), LoadOptions opt = {}) {
    std::istringstream in(text);
    return read_csv(in, s, opt);
}

}  // namespace

TEST_CASE("three clean rows") {
    const auto r = parse(
        "id,u,v,price,floor_area,house_age\n"
        "a,0,0,10.5,50,3\n"
        "b,100,20,12,60,10\n"
        "c,-5,7.25,8,45,30\n");
    CHECK(r.table.size() == 3);
    CHECK(r.report.accepted == 3);
    CHECK(r.report.rejected.empty());
    CHECK(r.table.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(r.table.coords(2, 1) == 7.25);
    CHECK(r.table.response(0) == 10.5);
    CHECK(r.table.covariate_names == std::vector<std::string>{"floor_area", "house_age"});
    CHECK(r.table.covariates(1, 1) == 10.0);
}

TEST_CASE("rows with blank or bad required fields are rejected with line numbers") {
    const auto r = parse(
        "id,u,v,price,floor_area,house_age\n"
        "a,0,0,10.5,50,3\n"
        "b,1,1,,60,10\n"
        "c,2,2,9,abc,4\n"
        "d,3,3,8,45,30\n"
        "e,4,4,7,inf,1\n"
        "f,5,5,6,40,2\n");
    CHECK(r.table.size() == 3);
    CHECK(r.report.total_rows == 6);
    REQUIRE(r.report.rejected.size() == 3);
    CHECK(r.report.rejected[0].line == 3);
    CHECK(r.report.rejected[0].reason.find("price") != std::string::npos);
    CHECK(r.report.rejected[1].line == 4);
    CHECK(r.report.rejected[2].line == 6);
    CHECK(r.report.to_json()["rejected_count"] == 3);
}

TEST_CASE("more than half rejected is fatal") {
    CHECK_THROWS_AS(parse("id,u,v,price,floor_area,house_age\n"
                          "a,0,0,1,1,1\n"
                          "b,0,0,,1,1\n"
                          "c,0,0,,1,1\n"),
                    IngestionError);
    CHECK_NOTHROW(parse("id,u,v,price,floor_area,house_age\n"
                        "a,0,0,1,1,1\n"
                        "b,0,0,,1,1\n"));
}

TEST_CASE("schema problems") {
    CHECK_THROWS_AS(parse("id,u,v,price,floor_area\na,0,0,1,1\n"), SchemaError);
    CHECK_THROWS_AS(parse(""), SchemaError);
    Schema twice = small_schema();
    twice.columns.push_back({"price2", ColumnRole::response, ""});
    CHECK_THROWS_AS(twice.validate(), SchemaError);
    Schema dup = small_schema();
    dup.columns.push_back({"u", ColumnRole::covariate, ""});
    CHECK_THROWS_AS(dup.validate(), SchemaError);
    CHECK_THROWS_AS(column_role_from_string("bogus"), SchemaError);
}

TEST_CASE("response column may be omitted for queries") {
    LoadOptions opt;
    opt.require_response = false;
    const auto r = parse("id,u,v,floor_area,house_age\nq1,0,0,50,3\n", small_schema(), opt);
    CHECK_FALSE(r.table.has_response);
    CHECK(r.table.size() == 1);
    CHECK_THROWS_AS(parse("id,u,v,floor_area,house_age\nq1,0,0,50,3\n"), SchemaError);
}

TEST_CASE("byte order mark, quoted fields, extra columns and CRLF") {
    const auto r = parse(
        "\xEF\xBB\xBFid,u,v,note,price,floor_area,house_age\r\n"
        "\"x,1\",0,0,\"say \"\"hi\"\"\",10,50,3\r\n"
        "y,1,2,plain,11,51,4\r\n");
    CHECK(r.table.size() == 2);
    CHECK(r.table.ids[0] == "x,1");
    CHECK(r.report.ignored_columns == std::vector<std::string>{"note"});
    CHECK(r.table.covariates(1, 1) == 4.0);
}

TEST_CASE("duplicate ids are rejected") {
    const auto r = parse("id,u,v,price,floor_area,house_age\na,0,0,1,1,1\nb,0,0,1,1,1\na,1,1,2,2,2\n");
    CHECK(r.table.size() == 2);
    REQUIRE(r.report.rejected.size() == 1);
    CHECK(r.report.rejected[0].line == 4);
    CHECK(r.report.rejected[0].reason.find("duplicate") != std::string::npos);
    ObservationTable t = r.table;
    t.ids[1] = "a";
    CHECK_THROWS_AS(t.validate(), InputError);
}

TEST_CASE("write and read round trip is exact") {
    SyntheticConfig c;
    c.regime = Regime::mixed;
    c.n = 60;
    c.sigma = 3.7;
    c.seed = 9;
    c.land_use = true;
    const auto data = generate_synthetic(c);
    const auto schema = synthetic_schema(c);
    std::ostringstream out;
    write_csv(out, data.table, schema);
    const auto back = parse(out.str(), schema);
    CHECK(back.table == data.table);
    std::ostringstream again;
    write_csv(again, back.table, schema);
    CHECK(again.str() == out.str());
}

TEST_CASE("format_double is shortest round trip") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0, 5e-324}) CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("schema JSON round trip and file io") {
    const auto s = small_schema();
    const auto j = s.to_json();
    CHECK(j["version"] == 1);
    CHECK(j["columns"][1]["role"] == "coordinate_u");
    const auto back = Schema::from_json(j);
    CHECK(back.to_json() == j);
    const auto path = (std::filesystem::temp_directory_path() / "cwr_test_schema.json").string();
    s.save(path);
    CHECK(Schema::load(path).to_json() == j);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Schema::load("/nonexistent/dir/schema.json"), IoError);
    CHECK_THROWS_AS(load_csv("/nonexistent/dir/data.csv", s), IoError);
}

TEST_CASE("dummy expansion drops the first sorted level") {
    Schema s = small_schema();
    s.columns.push_back({"land_use", ColumnRole::dummy_source, ""});
    const auto r = parse(
        "id,u,v,price,floor_area,house_age,land_use\n"
        "a,0,0,1,1,1,residential\n"
        "b,0,1,1,1,1,commercial\n"
        "c,1,0,1,1,1,industrial\n"
        "d,1,1,1,1,1,residential\n",
        s);
    const auto& t = r.table;
    CHECK(t.covariate_names ==
          std::vector<std::string>{"floor_area", "house_age", "land_use=industrial", "land_use=residential"});
    CHECK(t.dummy == std::vector<bool>{false, false, true, true});
    CHECK(t.non_dummy_covariates() == std::vector<std::string>{"floor_area", "house_age"});
    Matrix expect(4, 2);
    expect << 0, 1, 0, 0, 1, 0, 0, 1;
    CHECK(t.columns({"land_use=industrial", "land_use=residential"}) == expect);
    CHECK(t.categoricals[0].levels == std::vector<std::string>{"commercial", "industrial", "residential"});
}

TEST_CASE("design matrix and column lookup") {
    const auto r = parse("id,u,v,price,floor_area,house_age\na,0,0,1,50,3\nb,0,0,1,60,4\n");
    const Matrix d = r.table.design({"house_age"});
    CHECK(d.col(0) == Vector::Ones(2));
    CHECK(d(1, 1) == 4.0);
    CHECK_THROWS_AS(r.table.covariate_index("nope"), SchemaError);
    CHECK(r.table.has_covariate("floor_area"));
}

TEST_CASE("split sizes, disjointness and coverage") {
    for (auto [n, train, test] : {std::tuple{10, 8, 2}, std::tuple{1035, 828, 207}}) {
        const auto s = split_indices(n, SplitSpec{0.8, 42});
        CHECK(s.train.size() == static_cast<std::size_t>(train));
        CHECK(s.test.size() == static_cast<std::size_t>(test));
        std::set<Eigen::Index> all(s.train.begin(), s.train.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == static_cast<std::size_t>(n));
        CHECK(*all.begin() == 0);
        CHECK(*all.rbegin() == n - 1);
        CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    }
}

TEST_CASE("split determinism") {
    const auto a = split_indices(500, SplitSpec{0.8, 7});
    const auto b = split_indices(500, SplitSpec{0.8, 7});
    const auto c = split_indices(500, SplitSpec{0.8, 8});
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
    CHECK_THROWS_AS(split_indices(100, SplitSpec{1.0, 1}), ParameterError);
    CHECK_THROWS_AS(split_indices(100, SplitSpec{0.0, 1}), ParameterError);
    CHECK_THROWS_AS(split_indices(4, SplitSpec{0.8, 1}), ParameterError);
}

TEST_CASE("split tables follow the index") {
    SyntheticConfig c;
    c.n = 50;
    c.seed = 3;
    const auto t = generate_synthetic(c).table;
    const auto [train, test] = split(t, SplitSpec{0.8, 11});
    const auto idx = split_indices(50, SplitSpec{0.8, 11});
    for (std::size_t k = 0; k < idx.test.size(); ++k) {
        CHECK(test.ids[k] == t.ids[static_cast<std::size_t>(idx.test[k])]);
        CHECK(test.response(static_cast<Eigen::Index>(k)) == t.response(idx.test[k]));
    }
    CHECK(train.size() == 40);
}

TEST_CASE("Rng follows its documented derivations") {
    std::mt19937_64 ref(123);
    Rng rng(123);
    CHECK(rng.next() == ref());
    CHECK(rng.uniform01() == static_cast<double>(ref() >> 11) * 0x1.0p-53);
    for (int k = 0; k < 1000; ++k) CHECK(rng.below(7) < 7);
    Rng a(5), b(5);
    for (int k = 0; k < 10; ++k) CHECK(a.normal() == b.normal());
    Rng big(1);
    double sum = 0, sq = 0;
    for (int k = 0; k < 20000; ++k) {
        const double z = big.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / 20000) < 0.05);
    CHECK(std::abs(sq / 20000 - 1) < 0.05);
}

TEST_CASE("standardize") {
    const auto r = parse(
        "id,u,v,price,floor_area,house_age\n"
        "a,0,0,1,1,5\n"
        "b,0,0,1,2,5\n"
        "c,0,0,1,3,5\n");
    const auto s = standardize(r.table, {"floor_area", "house_age"});
    CHECK(s.transform.columns == std::vector<std::string>{"floor_area"});
    CHECK(s.transform.excluded == std::vector<std::string>{"house_age"});
    CHECK(s.warnings.size() == 1);
    REQUIRE(s.values.cols() == 1);
    const double k = std::sqrt(1.5);
    CHECK(s.values(0, 0) == doctest::Approx(-k).epsilon(1e-15));
    CHECK(s.values(1, 0) == 0.0);
    CHECK(s.values(2, 0) == doctest::Approx(k).epsilon(1e-15));
    const auto back = StandardizationTransform::from_json(s.transform.to_json());
    CHECK(back.apply(r.table) == s.values);
}

TEST_CASE("standardized training columns have zero mean and unit variance") {
    SyntheticConfig c;
    c.n = 200;
    c.seed = 4;
    const auto t = generate_synthetic(c).table;
    const auto s = standardize(t, t.covariate_names);
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) {
        CHECK(std::abs(s.values.col(j).mean()) <= 1e-12);
        CHECK(s.values.col(j).squaredNorm() / 200.0 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("synthetic generator is deterministic") {
    SyntheticConfig c;
    c.regime = Regime::attr;
    c.n = 120;
    c.sigma = 20;
    c.seed = 77;
    CHECK(generate_synthetic(c).table == generate_synthetic(c).table);
    c.seed = 78;
    SyntheticConfig d = c;
    d.seed = 77;
    CHECK_FALSE(generate_synthetic(c).table == generate_synthetic(d).table);
    const auto back = SyntheticConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
}

TEST_CASE("noiseless synthetic prices follow the true coefficients") {
    for (Regime reg : {Regime::geo, Regime::attr, Regime::mixed}) {
        SyntheticConfig c;
        c.regime = reg;
        c.n = 100;
        c.seed = 12;
        const auto data = generate_synthetic(c);
        const auto& t = data.table;
        const Matrix X = t.design(std::vector<std::string>(data.coefficient_names.begin() + 1, data.coefficient_names.end()));
        const Vector rowwise = (X.array() * data.true_coefficients.array()).rowwise().sum();
        CHECK((rowwise - t.response).cwiseAbs().maxCoeff() <= 1e-9 * t.response.cwiseAbs().maxCoeff());
        CHECK(data.true_price == t.response);
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double u = t.coords(i, 0), v = t.coords(i, 1);
            const double area = t.covariates(i, t.covariate_index(kFloorArea));
            const double age = t.covariates(i, t.covariate_index(kHouseAge));
            CHECK(true_price(c, u, v, area, age) == doctest::Approx(t.response(i)).epsilon(1e-12));
            const auto b = true_coefficients(c, u, v, age);
            CHECK(b(0) == doctest::Approx(data.true_coefficients(i, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("GEO surfaces vary over space and not with age") {
    SyntheticConfig c;
    const auto a = true_coefficients(c, 1000, 1000, 5);
    const auto b = true_coefficients(c, 1000, 1000, 40);
    const auto far = true_coefficients(c, 4000, 2500, 5);
    CHECK(a == b);
    CHECK((a - far).norm() > 1.0);
    c.regime = Regime::attr;
    CHECK(true_coefficients(c, 1000, 1000, 5) == true_coefficients(c, 4000, 2500, 5));
    CHECK(true_coefficients(c, 1000, 1000, 5) != true_coefficients(c, 1000, 1000, 40));
}

TEST_CASE("synthetic config validation") {
    CHECK_THROWS_AS(regime_from_string("SPACE"), ParameterError);
    CHECK(regime_from_string("attr") == Regime::attr);
    SyntheticConfig c;
    c.n = 19;
    CHECK_THROWS_AS(generate_synthetic(c), ParameterError);
    c.n = 50;
    c.sigma = -1;
    CHECK_THROWS_AS(generate_synthetic(c), ParameterError);
    c.sigma = 0;
    CHECK_THROWS_AS(calibrate_sigma(c, 1.0), ParameterError);
}

TEST_CASE("sigma calibration hits the target fit") {
    SyntheticConfig c;
    c.regime = Regime::attr;
    c.n = 400;
    c.seed = 5;
    c.sigma = calibrate_sigma(c, 0.6);
    CHECK(c.sigma > 0);
    const auto t = generate_synthetic(c).table;
    const Matrix X = t.design({kFloorArea, kHouseAge});
    const Vector fit = X * fit_ols(X, t.response);
    const double ss_res = (t.response - fit).squaredNorm();
    const double ss_tot = (t.response.array() - t.response.mean()).square().sum();
    CHECK(1 - ss_res / ss_tot == doctest::Approx(0.6).epsilon(0.1));
}

TEST_CASE("synthetic schema matches generator output") {
    SyntheticConfig c;
    c.land_use = true;
    c.n = 30;
    const auto s = synthetic_schema(c);
    CHECK_NOTHROW(s.validate());
    const auto data = generate_synthetic(c);
    CHECK(data.table.covariate_count() == 2 + 10 + 2);
    std::ostringstream out;
    write_csv(out, data.table, s);
    CHECK(out.str().substr(0, out.str().find('\n')).find("land_use") != std::string::npos);
}
