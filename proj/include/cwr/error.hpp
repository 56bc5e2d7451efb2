#pragma once

#include <stdexcept>
#include <string>

namespace cwr {

/// Base for every error raised by the library. `kind()` is a stable,
/// machine-readable tag used in the CLI's JSON error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

struct InputError : Error {
    explicit InputError(const std::string& m) : Error("input", m) {}
};

struct SingularityError : Error {
    explicit SingularityError(const std::string& m) : Error("singular", m) {}
};

struct DegenerateWeightsError : Error {
    explicit DegenerateWeightsError(const std::string& m) : Error("degenerate-weights", m) {}
};

struct SearchFailure : Error {
    explicit SearchFailure(const std::string& m) : Error("search-failure", m) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& m) : Error("schema", m) {}
};

struct IngestionError : Error {
    explicit IngestionError(const std::string& m) : Error("ingestion", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace cwr
