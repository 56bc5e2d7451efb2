#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "cwr/distance.hpp"
#include "cwr/table.hpp"

using namespace cwr;

namespace {

Coordinates coords(std::initializer_list<std::pair<double, double>> pts) {
    Coordinates c(static_cast<Eigen::Index>(pts.size()), 2);
    Eigen::Index i = 0;
    for (auto [u, v] : pts) {
        c(i, 0) = u;
        c(i, 1) = v;
        ++i;
    }
    return c;
}

Coordinates random_coords(Rng& rng, Eigen::Index n) {
    Coordinates c(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) c.row(i) << rng.uniform(-500, 500), rng.uniform(-500, 500);
    return c;
}

}  // namespace

TEST_CASE("geographic distances") {
    const auto a = coords({{0, 0}, {1, 1}});
    const auto b = coords({{3, 4}, {4, 5}});
    const auto d = geographic_distances(a, b);
    CHECK(d(0, 0) == 5.0);
    CHECK(d(1, 1) == 5.0);
    CHECK(geographic_distances(a).diagonal().isZero(0.0));
}

TEST_CASE("geographic distances reject bad input") {
    Matrix three(2, 3);
    three.setZero();
    CHECK_THROWS_AS(geographic_distances(three), DimensionError);
    auto c = coords({{0, 0}, {1, std::numeric_limits<double>::quiet_NaN()}});
    CHECK_THROWS_AS(geographic_distances(c), InputError);
    c(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(geographic_distances(c), InputError);
}

TEST_CASE("attribute distances") {
    Matrix a(3, 2), b(1, 2);
    a << 0, 0, 1, 2, 7, 7;
    b << 1, 0;
    CHECK(attribute_distances(a, b)(0, 0) == 1.0);
    Matrix p(1, 2), q(1, 2);
    p << 1, 2;
    q << 4, 6;
    CHECK(attribute_distances(p, q)(0, 0) == 5.0);
    CHECK(attribute_distances(a).diagonal().isZero(0.0));
    Matrix wide(1, 3);
    wide.setZero();
    CHECK_THROWS_AS(attribute_distances(a, wide), DimensionError);
}

TEST_CASE("blend endpoints and arithmetic") {
    Rng rng(3);
    const auto g = geographic_distances(random_coords(rng, 6));
    const auto a = geographic_distances(random_coords(rng, 6));
    CHECK(blend_distances(g, a, 1.0) == g);
    CHECK(blend_distances(g, a, 0.0) == a);
    DistanceMatrix dg(1, 1), da(1, 1);
    dg << 4;
    da << 8;
    CHECK(blend_distances(dg, da, 0.25)(0, 0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("blend errors") {
    DistanceMatrix g = DistanceMatrix::Ones(2, 2), a = DistanceMatrix::Ones(2, 3);
    CHECK_THROWS_AS(blend_distances(g, a, 0.5), DimensionError);
    CHECK_THROWS_AS(blend_distances(g, g, -0.01), ParameterError);
    CHECK_THROWS_AS(blend_distances(g, g, 1.01), ParameterError);
    CHECK_THROWS_AS(blend_distances(g, g, std::numeric_limits<double>::quiet_NaN()), ParameterError);
}

TEST_CASE("blend stays between its inputs") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = geographic_distances(random_coords(rng, 8));
        const DistanceMatrix a = 1e-3 * geographic_distances(random_coords(rng, 8));
        const double r = rng.uniform01();
        const auto b = blend_distances(g, a, r);
        CHECK((b.array() >= g.cwiseMin(a).array()).all());
        CHECK((b.array() <= g.cwiseMax(a).array()).all());
    }
}

TEST_CASE("square distance matrices are symmetric") {
    Rng rng(5);
    const auto g = geographic_distances(random_coords(rng, 12));
    Matrix attrs(12, 3);
    for (Eigen::Index i = 0; i < attrs.size(); ++i) attrs(i) = rng.normal();
    const auto a = attribute_distances(attrs);
    CHECK(g == g.transpose());
    CHECK(a == a.transpose());
}

TEST_CASE("gaussian kernel values") {
    DistanceMatrix d(1, 4);
    const double h = 2.5;
    d << 0, h, 2 * h, 3 * h;
    const auto w = gaussian_weights(d, h);
    CHECK(w(0, 0) == 1.0);
    CHECK(std::abs(w(0, 1) - std::exp(-1.0)) <= 1e-12);
    CHECK(std::abs(w(0, 2) - std::exp(-4.0)) <= 1e-12);
    CHECK(std::abs(w(0, 3) - std::exp(-9.0)) <= 1e-12);
    CHECK(w(0, 1) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK(w(0, 2) == doctest::Approx(0.018316).epsilon(1e-5));
}

TEST_CASE("gaussian kernel rejects bad bandwidths") {
    DistanceMatrix d = DistanceMatrix::Ones(1, 1);
    CHECK_THROWS_AS(gaussian_weights(d, 0.0), ParameterError);
    CHECK_THROWS_AS(gaussian_weights(d, -1.0), ParameterError);
    CHECK_THROWS_AS(gaussian_weights(d, std::numeric_limits<double>::infinity()), ParameterError);
}

TEST_CASE("kernel monotonicity in distance and bandwidth") {
    DistanceMatrix d(1, 5);
    d << 0.1, 0.2, 0.5, 1.0, 2.0;
    const auto w = gaussian_weights(d, 0.8);
    for (Eigen::Index j = 1; j < d.cols(); ++j) CHECK(w(0, j) < w(0, j - 1));
    double prev = 0.0;
    for (double h : {0.2, 0.5, 1.0, 3.0, 10.0}) {
        const double v = gaussian_weights(d, h)(0, 2);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("max-scale normalization") {
    Rng rng(8);
    const auto g = geographic_distances(random_coords(rng, 10));
    const auto scales = fit_scales(g, g, Normalization::max_scale);
    CHECK((g / scales.geo).maxCoeff() == 1.0);
    CHECK(max_scale(DistanceMatrix::Zero(3, 3)) == 1.0);
    CHECK(max_scale(DistanceMatrix(0, 0)) == 1.0);
    const auto none = fit_scales(g, g, Normalization::none);
    CHECK(none.geo == 1.0);
    CHECK(none.attr == 1.0);
}

TEST_CASE("distance spec validation") {
    DistanceSpec s;
    CHECK_NOTHROW(s.validate());
    s.rate = 0.5;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s.attribute_columns = {"floor_area"};
    CHECK_NOTHROW(s.validate());
    s.rate = 1.5;
    CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("templated on scalar") {
    CoordinatesT<float> c(2, 2);
    c << 0, 0, 3, 4;
    const auto d = geographic_distances(c);
    static_assert(std::is_same_v<decltype(d)::Scalar, float>);
    CHECK(d(0, 1) == 5.0f);
}

TEST_CASE("far points get exactly zero weight") {
    DistanceMatrix d(1, 16);
    for (Eigen::Index j = 0; j < 16; ++j) d(0, j) = 30.0 + 10.0 * static_cast<double>(j);
    const auto w = gaussian_weights(d, 1.0);
    CHECK(w(0, 0) == std::exp(-900.0));
    CHECK(w.isZero(0.0));
    DistanceMatrix near(1, 8);
    near << 0, 1, 2, 3, 4, 5, 26, 27;
    const auto wn = gaussian_weights(near, 1.0);
    for (Eigen::Index j = 0; j < 6; ++j) CHECK(wn(0, j) == doctest::Approx(std::exp(-near(0, j) * near(0, j))).epsilon(1e-14));
    CHECK(wn(0, 6) > 0.0);
    CHECK(wn(0, 7) == 0.0);
}
