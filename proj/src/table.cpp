#include "cwr/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cwr {

// ----------------------------------------------------------------- table ---

Eigen::Index ObservationTable::covariate_index(const std::string& name) const {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw SchemaError("unknown covariate '" + name + "'");
    return static_cast<Eigen::Index>(it - covariate_names.begin());
}

bool ObservationTable::has_covariate(const std::string& name) const {
    return std::find(covariate_names.begin(), covariate_names.end(), name) != covariate_names.end();
}

Matrix ObservationTable::columns(const std::vector<std::string>& names) const {
    Matrix out(size(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = covariates.col(covariate_index(names[k]));
    return out;
}

Matrix ObservationTable::design(const std::vector<std::string>& names) const {
    Matrix out(size(), static_cast<Eigen::Index>(names.size()) + 1);
    out.col(0).setOnes();
    out.rightCols(static_cast<Eigen::Index>(names.size())) = columns(names);
    return out;
}

std::vector<std::string> ObservationTable::non_dummy_covariates() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < covariate_names.size(); ++k)
        if (!dummy[k]) out.push_back(covariate_names[k]);
    return out;
}

ObservationTable ObservationTable::rows(std::span<const Eigen::Index> index) const {
    ObservationTable out;
    const auto m = static_cast<Eigen::Index>(index.size());
    out.covariate_names = covariate_names;
    out.dummy = dummy;
    out.has_response = has_response;
    out.coords.resize(m, 2);
    out.response.resize(m);
    out.covariates.resize(m, covariates.cols());
    out.ids.reserve(index.size());
    for (auto& c : categoricals) out.categoricals.push_back({c.name, c.levels, {}});
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index src = index[static_cast<std::size_t>(r)];
        if (src < 0 || src >= size()) throw DimensionError("row index out of range");
        out.ids.push_back(ids[static_cast<std::size_t>(src)]);
        out.coords.row(r) = coords.row(src);
        out.response(r) = response(src);
        out.covariates.row(r) = covariates.row(src);
        for (std::size_t c = 0; c < categoricals.size(); ++c)
            out.categoricals[c].values.push_back(categoricals[c].values[static_cast<std::size_t>(src)]);
    }
    return out;
}

namespace {

template <typename D>
bool bitwise_equal(const Eigen::DenseBase<D>& a, const Eigen::DenseBase<D>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const double x = a(i, j), y = b(i, j);
            if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
        }
    return true;
}

}  // namespace

bool ObservationTable::operator==(const ObservationTable& o) const {
    if (ids != o.ids || covariate_names != o.covariate_names || dummy != o.dummy || has_response != o.has_response)
        return false;
    if (categoricals.size() != o.categoricals.size()) return false;
    for (std::size_t c = 0; c < categoricals.size(); ++c) {
        const auto& a = categoricals[c];
        const auto& b = o.categoricals[c];
        if (a.name != b.name || a.levels != b.levels || a.values != b.values) return false;
    }
    return bitwise_equal(coords, o.coords) && bitwise_equal(response, o.response) &&
           bitwise_equal(covariates, o.covariates);
}

void ObservationTable::validate() const {
    const Eigen::Index n = size();
    if (coords.rows() != n || response.size() != n || covariates.rows() != n)
        throw DimensionError("observation table columns differ in length");
    if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols() ||
        dummy.size() != covariate_names.size())
        throw DimensionError("covariate names do not match covariate columns");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw InputError("duplicate record id '" + id + "'");
    if (!coords.allFinite() || !covariates.allFinite() || (has_response && !response.allFinite()))
        throw InputError("observation table contains non-finite values");
}

// ---------------------------------------------------------------- schema ---

std::string to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::id: return "id";
        case ColumnRole::coordinate_u: return "coordinate_u";
        case ColumnRole::coordinate_v: return "coordinate_v";
        case ColumnRole::response: return "response";
        case ColumnRole::covariate: return "covariate";
        case ColumnRole::dummy_source: return "dummy-source";
    }
    return "?";
}

ColumnRole column_role_from_string(const std::string& s) {
    static const std::map<std::string, ColumnRole> roles{
        {"id", ColumnRole::id},
        {"coordinate_u", ColumnRole::coordinate_u},
        {"coordinate_v", ColumnRole::coordinate_v},
        {"response", ColumnRole::response},
        {"covariate", ColumnRole::covariate},
        {"dummy-source", ColumnRole::dummy_source},
    };
    const auto it = roles.find(s);
    if (it == roles.end()) throw SchemaError("unknown column role '" + s + "'");
    return it->second;
}

const ColumnSpec& Schema::column(ColumnRole role) const {
    for (const auto& c : columns)
        if (c.role == role) return c;
    throw SchemaError("schema has no " + to_string(role) + " column");
}

std::vector<const ColumnSpec*> Schema::columns_with(ColumnRole role) const {
    std::vector<const ColumnSpec*> out;
    for (const auto& c : columns)
        if (c.role == role) out.push_back(&c);
    return out;
}

void Schema::validate() const {
    for (auto role : {ColumnRole::id, ColumnRole::coordinate_u, ColumnRole::coordinate_v, ColumnRole::response}) {
        const auto n = columns_with(role).size();
        if (n != 1)
            throw SchemaError("schema must have exactly one " + to_string(role) + " column, found " + std::to_string(n));
    }
    std::set<std::string> names;
    for (const auto& c : columns) {
        if (c.name.empty()) throw SchemaError("schema column with empty name");
        if (!names.insert(c.name).second) throw SchemaError("duplicate schema column '" + c.name + "'");
    }
}

nlohmann::json Schema::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) {
        nlohmann::json entry{{"name", c.name}, {"role", to_string(c.role)}};
        if (!c.unit.empty()) entry["unit"] = c.unit;
        cols.push_back(entry);
    }
    return {{"version", version}, {"columns", cols}};
}

Schema Schema::from_json(const nlohmann::json& j) {
    Schema s;
    try {
        s.version = j.value("version", 1);
        for (const auto& c : j.at("columns"))
            s.columns.push_back({c.at("name").get<std::string>(),
                                 column_role_from_string(c.at("role").get<std::string>()), c.value("unit", "")});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema: ") + e.what());
    }
    if (s.version != 1) throw SchemaError("unsupported schema version " + std::to_string(s.version));
    s.validate();
    return s;
}

Schema Schema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file '" + path + "'");
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("schema '" + path + "' is not valid JSON: " + e.what());
    }
}

void Schema::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write schema file '" + path + "'");
    out << to_json().dump(2) << '\n';
}

nlohmann::json IngestionReport::to_json() const {
    nlohmann::json rej = nlohmann::json::array();
    for (const auto& r : rejected) rej.push_back({{"line", r.line}, {"reason", r.reason}});
    return {{"total_rows", total_rows},
            {"accepted", accepted},
            {"rejected_count", rejected.size()},
            {"rejected", rej},
            {"ignored_columns", ignored_columns}};
}

// ------------------------------------------------------------------- csv ---

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw InputError("cannot format number");
    return std::string(buf, ptr);
}

LoadResult read_csv(std::istream& in, const Schema& schema, const LoadOptions& options) {
    schema.validate();
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("CSV input is empty; a header row is required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t k = 0; k < header.size(); ++k) position.emplace(header[k], k);

    struct Bound {
        const ColumnSpec* spec;
        std::size_t pos;
    };
    std::vector<Bound> bound;
    const ColumnSpec* response_spec = &schema.column(ColumnRole::response);
    bool response_present = position.count(response_spec->name) > 0;
    std::vector<std::string> missing;
    for (const auto& c : schema.columns) {
        const auto it = position.find(c.name);
        if (it == position.end()) {
            if (c.role == ColumnRole::response && !options.require_response) continue;
            missing.push_back(c.name);
        } else {
            bound.push_back({&c, it->second});
        }
    }
    if (!missing.empty()) {
        std::string msg = "CSV is missing required column(s):";
        for (const auto& m : missing) msg += " '" + m + "'";
        throw SchemaError(msg);
    }

    LoadResult result;
    auto& report = result.report;
    for (const auto& h : header) {
        const bool known = std::any_of(schema.columns.begin(), schema.columns.end(),
                                       [&](const ColumnSpec& c) { return c.name == h; });
        if (!known) report.ignored_columns.push_back(h);
    }

    const auto covariate_specs = schema.columns_with(ColumnRole::covariate);
    const auto dummy_specs = schema.columns_with(ColumnRole::dummy_source);

    struct Row {
        std::string id;
        double u = 0, v = 0, y = std::nan("");
        std::vector<double> cov;
        std::vector<std::string> cat;
    };
    std::vector<Row> rows;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++report.total_rows;
        const auto fields = split_csv_line(line);
        Row row;
        row.cov.resize(covariate_specs.size());
        row.cat.resize(dummy_specs.size());
        std::string reason;
        auto field = [&](std::size_t pos) { return pos < fields.size() ? trim(fields[pos]) : std::string(); };
        for (const auto& b : bound) {
            const std::string text = field(b.pos);
            if (text.empty()) {
                reason = "blank value in column '" + b.spec->name + "'";
                break;
            }
            double value = 0.0;
            const bool numeric = b.spec->role != ColumnRole::id && b.spec->role != ColumnRole::dummy_source;
            if (numeric && !parse_number(text, value)) {
                reason = "unparseable number '" + text + "' in column '" + b.spec->name + "'";
                break;
            }
            switch (b.spec->role) {
                case ColumnRole::id: row.id = text; break;
                case ColumnRole::coordinate_u: row.u = value; break;
                case ColumnRole::coordinate_v: row.v = value; break;
                case ColumnRole::response: row.y = value; break;
                case ColumnRole::covariate: {
                    const auto k = std::find(covariate_specs.begin(), covariate_specs.end(), b.spec) - covariate_specs.begin();
                    row.cov[static_cast<std::size_t>(k)] = value;
                    break;
                }
                case ColumnRole::dummy_source: {
                    const auto k = std::find(dummy_specs.begin(), dummy_specs.end(), b.spec) - dummy_specs.begin();
                    row.cat[static_cast<std::size_t>(k)] = text;
                    break;
                }
            }
        }
        if (reason.empty() && !ids.insert(row.id).second) reason = "duplicate id '" + row.id + "'";
        if (!reason.empty()) {
            report.rejected.push_back({line_no, reason});
            continue;
        }
        rows.push_back(std::move(row));
    }
    report.accepted = rows.size();

    if (report.total_rows == 0) throw IngestionError("CSV contains no data rows");
    if (2 * report.rejected.size() > report.total_rows)
        throw IngestionError(std::to_string(report.rejected.size()) + " of " + std::to_string(report.total_rows) +
                             " rows rejected (more than half); first: line " +
                             std::to_string(report.rejected.front().line) + ": " + report.rejected.front().reason);

    auto& t = result.table;
    const auto n = static_cast<Eigen::Index>(rows.size());
    t.has_response = response_present;
    t.coords.resize(n, 2);
    t.response.resize(n);
    for (const auto* c : covariate_specs) {
        t.covariate_names.push_back(c->name);
        t.dummy.push_back(false);
    }
    for (std::size_t d = 0; d < dummy_specs.size(); ++d) {
        CategoricalColumn cat{dummy_specs[d]->name, {}, {}};
        std::set<std::string> levels;
        for (const auto& r : rows) levels.insert(r.cat[d]);
        cat.levels.assign(levels.begin(), levels.end());
        for (std::size_t l = 1; l < cat.levels.size(); ++l) {
            t.covariate_names.push_back(cat.name + "=" + cat.levels[l]);
            t.dummy.push_back(true);
        }
        t.categoricals.push_back(std::move(cat));
    }
    t.covariates.resize(n, static_cast<Eigen::Index>(t.covariate_names.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& r = rows[static_cast<std::size_t>(i)];
        t.ids.push_back(r.id);
        t.coords(i, 0) = r.u;
        t.coords(i, 1) = r.v;
        t.response(i) = r.y;
        Eigen::Index col = 0;
        for (double x : r.cov) t.covariates(i, col++) = x;
        for (std::size_t d = 0; d < t.categoricals.size(); ++d) {
            auto& cat = t.categoricals[d];
            for (std::size_t l = 1; l < cat.levels.size(); ++l) t.covariates(i, col++) = r.cat[d] == cat.levels[l] ? 1.0 : 0.0;
            cat.values.push_back(r.cat[d]);
        }
    }
    t.validate();
    return result;
}

LoadResult load_csv(const std::string& path, const Schema& schema, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open data file '" + path + "'");
    return read_csv(in, schema, options);
}

void write_csv(std::ostream& out, const ObservationTable& table, const Schema& schema) {
    schema.validate();
    std::vector<const ColumnSpec*> cols;
    for (const auto& c : schema.columns)
        if (c.role != ColumnRole::response || table.has_response) cols.push_back(&c);
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << quote_if_needed(cols[k]->name);
    out << '\n';
    for (Eigen::Index i = 0; i < table.size(); ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (k) out << ',';
            const auto& c = *cols[k];
            switch (c.role) {
                case ColumnRole::id: out << quote_if_needed(table.ids[static_cast<std::size_t>(i)]); break;
                case ColumnRole::coordinate_u: out << format_double(table.coords(i, 0)); break;
                case ColumnRole::coordinate_v: out << format_double(table.coords(i, 1)); break;
                case ColumnRole::response: out << format_double(table.response(i)); break;
                case ColumnRole::covariate: out << format_double(table.covariates(i, table.covariate_index(c.name))); break;
                case ColumnRole::dummy_source: {
                    const auto it = std::find_if(table.categoricals.begin(), table.categoricals.end(),
                                                 [&](const CategoricalColumn& cat) { return cat.name == c.name; });
                    if (it == table.categoricals.end()) throw SchemaError("table lacks categorical column '" + c.name + "'");
                    out << quote_if_needed(it->values[static_cast<std::size_t>(i)]);
                    break;
                }
            }
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const ObservationTable& table, const Schema& schema) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_csv(out, table, schema);
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ------------------------------------------------------------ randomness ---

std::uint64_t Rng::below(std::uint64_t m) {
    if (m == 0) throw ParameterError("Rng::below requires a positive bound");
    // 2^64 mod m, computed without overflow.
    const std::uint64_t rem = (std::uint64_t(0) - m) % m;
    for (;;) {
        const std::uint64_t x = engine_();
        if (rem == 0 || x < std::uint64_t(0) - rem) return x % m;
    }
}

double Rng::normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

SplitIndex split_indices(Eigen::Index n, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ParameterError("train fraction must lie strictly between 0 and 1");
    if (n < 5) throw ParameterError("split needs at least 5 records, got " + std::to_string(n));
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(spec.seed);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    auto n_train = static_cast<Eigen::Index>(std::llround(spec.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);
    SplitIndex out;
    out.train.assign(perm.begin(), perm.begin() + n_train);
    out.test.assign(perm.begin() + n_train, perm.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<ObservationTable, ObservationTable> split(const ObservationTable& table, const SplitSpec& spec) {
    const auto idx = split_indices(table.size(), spec);
    return {table.rows(idx.train), table.rows(idx.test)};
}

// ------------------------------------------------------- standardization ---

Matrix StandardizationTransform::apply(const Matrix& raw) const {
    if (raw.cols() != static_cast<Eigen::Index>(columns.size()))
        throw DimensionError("standardization expects " + std::to_string(columns.size()) + " columns, got " +
                             std::to_string(raw.cols()));
    if (!raw.allFinite()) throw InputError("cannot standardize non-finite attribute values");
    return ((raw.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array()).matrix();
}

Matrix StandardizationTransform::apply(const ObservationTable& table) const { return apply(table.columns(columns)); }

nlohmann::json StandardizationTransform::to_json() const {
    return {{"columns", columns},
            {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"stddev", std::vector<double>(stddev.data(), stddev.data() + stddev.size())},
            {"excluded", excluded}};
}

StandardizationTransform StandardizationTransform::from_json(const nlohmann::json& j) {
    StandardizationTransform t;
    t.columns = j.at("columns").get<std::vector<std::string>>();
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("stddev").get<std::vector<double>>();
    if (m.size() != t.columns.size() || s.size() != t.columns.size())
        throw InputError("standardization transform has inconsistent lengths");
    t.mean = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
    t.stddev = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
    t.excluded = j.value("excluded", std::vector<std::string>{});
    return t;
}

Standardized standardize(const ObservationTable& train, const std::vector<std::string>& columns) {
    if (train.size() == 0) throw InputError("cannot standardize an empty table");
    Standardized out;
    std::vector<double> means, stds;
    for (const auto& name : columns) {
        const Vector col = train.covariates.col(train.covariate_index(name));
        const double mu = col.mean();
        const double sd = std::sqrt((col.array() - mu).square().mean());
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
            out.transform.excluded.push_back(name);
            out.warnings.push_back("column '" + name + "' has zero variance on training data; excluded");
            continue;
        }
        out.transform.columns.push_back(name);
        means.push_back(mu);
        stds.push_back(sd);
    }
    out.transform.mean = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    out.transform.stddev = Eigen::Map<const Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    out.values = out.transform.apply(train);
    return out;
}

}  // namespace cwr
