#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwr/table.hpp"

namespace cwr {

/// GEO: coefficients vary smoothly over space. ATTR: coefficients depend on
/// a building class that is identifiable from house age, with classes
/// scattered uniformly over space. MIXED: convex combination of the two.
enum class Regime { geo, attr, mixed };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// One building class of the ATTR regime: houses with age in [age_lo, age_hi)
/// priced as intercept + area_slope * floor_area + age_slope * house_age.
struct AttributeClass {
    double age_lo = 0.0;
    double age_hi = 0.0;
    double intercept = 0.0;
    double area_slope = 0.0;
    double age_slope = 0.0;
};

/// Smooth GEO-regime surfaces over the normalized square (a, b) = (u, v) / extent:
///   intercept(a, b) = intercept_base + intercept_amp * sin(pi a) cos(pi b)
///   area(a, b)      = area_base + area_amp * sin(pi a) sin(pi b)
///   age(a, b)       = age_base + age_amp * cos(pi b)
struct GeoSurface {
    double intercept_base = 300.0;
    double intercept_amp = 250.0;
    double area_base = 8.0;
    double area_amp = 5.0;
    double age_base = -6.0;
    double age_amp = 4.0;
};

struct SyntheticConfig {
    Regime regime = Regime::geo;
    int n = 400;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double extent = 5000.0;       // side of the square study area, meters
    double mix = 0.5;             // MIXED weight on the GEO component
    bool land_use = false;        // emit a zero-effect categorical column
    double area_lo = 30.0;        // floor area range, m^2
    double area_hi = 200.0;
    GeoSurface surface;
    std::vector<AttributeClass> classes = default_classes();

    static std::vector<AttributeClass> default_classes();

    nlohmann::json to_json() const;
    static SyntheticConfig from_json(const nlohmann::json& j);
};

/// Column names emitted by the generator, in order.
inline const std::vector<std::string>& poi_columns() {
    static const std::vector<std::string> names{
        "dist_museum",        "dist_library", "dist_hotel",       "dist_convenience_store", "dist_train_station",
        "dist_school",        "dist_gas_station", "dist_temple", "dist_police_station",    "dist_restaurant"};
    return names;
}
inline constexpr const char* kFloorArea = "floor_area";
inline constexpr const char* kHouseAge = "house_age";

struct SyntheticData {
    ObservationTable table;
    /// Ground truth per record: intercept followed by one coefficient per
    /// numeric covariate (POI distances carry zero).
    Matrix true_coefficients;
    std::vector<std::string> coefficient_names;
    /// Noiseless price per record.
    Vector true_price;
};

/// Draw order (fixed, part of the output contract): POI sites for each of the
/// ten POI types (type k has 1 + k % 3 sites, each (u, v) uniform), then per
/// record u, v, class index, house age, floor area, [land-use level], noise.
SyntheticData generate_synthetic(const SyntheticConfig& config);

/// (intercept, floor-area slope, house-age slope) at a location for a house
/// of the given age.
Eigen::Vector3d true_coefficients(const SyntheticConfig& config, double u, double v, double house_age);
double true_price(const SyntheticConfig& config, double u, double v, double floor_area, double house_age);

/// Schema matching generator output.
Schema synthetic_schema(const SyntheticConfig& config);

/// Noise level at which an OLS fit on (floor_area, house_age) reaches about
/// `target_r2`, derived from the noiseless draw for `config.seed`:
///   sigma^2 = (s^2 - e^2) / target - s^2
/// where s^2 is the response variance and e^2 the noiseless OLS residual
/// variance. Returns 0 when the target is unreachable.
double calibrate_sigma(SyntheticConfig config, double target_r2);

}  // namespace cwr
