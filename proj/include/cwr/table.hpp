#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cwr/distance.hpp"
#include "cwr/wls.hpp"

namespace cwr {

/// A source column expanded into dummy covariates at ingestion. The raw
/// values are kept so the table can be written back in its source schema.
struct CategoricalColumn {
    std::string name;
    std::vector<std::string> levels;  // sorted; levels[0] is the reference level
    std::vector<std::string> values;  // one per record
};

/// Georeferenced records: coordinates in meters, a price response and named
/// covariates. Dummy covariates are flagged so they can be kept out of
/// attribute distances by default.
struct ObservationTable {
    std::vector<std::string> ids;
    Coordinates coords;
    Vector response;
    Matrix covariates;
    std::vector<std::string> covariate_names;
    std::vector<bool> dummy;
    std::vector<CategoricalColumn> categoricals;
    bool has_response = true;

    Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
    Eigen::Index covariate_count() const { return covariates.cols(); }

    /// Column index of a covariate; throws SchemaError when absent.
    Eigen::Index covariate_index(const std::string& name) const;
    bool has_covariate(const std::string& name) const;

    /// Raw covariate columns in the requested order.
    Matrix columns(const std::vector<std::string>& names) const;
    /// Intercept column followed by the requested covariates.
    Matrix design(const std::vector<std::string>& names) const;

    std::vector<std::string> non_dummy_covariates() const;

    ObservationTable rows(std::span<const Eigen::Index> index) const;

    /// Structural and bitwise value equality.
    bool operator==(const ObservationTable& other) const;

    /// Throws on duplicate ids, shape mismatches or non-finite values.
    void validate() const;
};

enum class ColumnRole { id, coordinate_u, coordinate_v, response, covariate, dummy_source };

struct ColumnSpec {
    std::string name;
    ColumnRole role = ColumnRole::covariate;
    std::string unit;
};

/// Required CSV columns and their roles. Stored as JSON:
/// {"version": 1, "columns": [{"name": "u", "role": "coordinate_u", "unit": "m"}, ...]}
struct Schema {
    int version = 1;
    std::vector<ColumnSpec> columns;

    const ColumnSpec& column(ColumnRole role) const;
    std::vector<const ColumnSpec*> columns_with(ColumnRole role) const;

    nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& j);
    static Schema load(const std::string& path);
    void save(const std::string& path) const;

    /// Throws SchemaError unless there is exactly one id, u, v and response
    /// column and all names are unique.
    void validate() const;
};

std::string to_string(ColumnRole role);
ColumnRole column_role_from_string(const std::string& s);

struct Rejection {
    std::size_t line = 0;  // 1-based line number in the file, header is line 1
    std::string reason;
};

struct IngestionReport {
    std::size_t total_rows = 0;
    std::size_t accepted = 0;
    std::vector<Rejection> rejected;
    std::vector<std::string> ignored_columns;

    nlohmann::json to_json() const;
};

struct LoadOptions {
    /// Queries for `predict` may omit the response column.
    bool require_response = true;
};

struct LoadResult {
    ObservationTable table;
    IngestionReport report;
};

/// Parses a comma-separated file with a header row. Rows with blank or
/// unparseable required fields are rejected and counted; more than half the
/// rows rejected is fatal (IngestionError). Missing required columns raise
/// SchemaError.
LoadResult read_csv(std::istream& in, const Schema& schema, const LoadOptions& options = {});
LoadResult load_csv(const std::string& path, const Schema& schema, const LoadOptions& options = {});

/// Writes the table in schema column order with round-trip exact numbers.
void write_csv(std::ostream& out, const ObservationTable& table, const Schema& schema);
void write_csv(const std::string& path, const ObservationTable& table, const Schema& schema);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// All shuffles and draws use std::mt19937_64 (whose output sequence is fixed
// by the C++ standard) with explicitly specified derivations so partitions and
// synthetic data are reproducible across standard libraries:
//   uniform01  = (next() >> 11) * 2^-53
//   below(m)   = rejection sampling: draw x until x < 2^64 - (2^64 mod m), return x mod m
//   normal     = Box-Muller on (1 - uniform01, uniform01), cosine branch only
// The split shuffle is a Fisher-Yates pass from the last index down
// ("cwr-split-v1").
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::uint64_t below(std::uint64_t m);
    double normal();

private:
    std::mt19937_64 engine_;
};

inline constexpr const char* kSplitAlgorithm = "cwr-split-v1";

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct SplitIndex {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

/// Row indices of a seeded random partition; each side is sorted ascending.
SplitIndex split_indices(Eigen::Index n, const SplitSpec& spec);
std::pair<ObservationTable, ObservationTable> split(const ObservationTable& table, const SplitSpec& spec);

/// Per-column z-score parameters (population standard deviation) fitted on
/// training data. Zero-variance columns are listed in `excluded` and dropped.
struct StandardizationTransform {
    std::vector<std::string> columns;
    Vector mean;
    Vector stddev;
    std::vector<std::string> excluded;

    /// Standardizes `raw`, whose columns follow `columns`.
    Matrix apply(const Matrix& raw) const;
    Matrix apply(const ObservationTable& table) const;

    nlohmann::json to_json() const;
    static StandardizationTransform from_json(const nlohmann::json& j);
};

struct Standardized {
    StandardizationTransform transform;
    Matrix values;
    std::vector<std::string> warnings;
};

Standardized standardize(const ObservationTable& train, const std::vector<std::string>& columns);

}  // namespace cwr
