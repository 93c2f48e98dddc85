#pragma once

#include <stdexcept>
#include <string>

namespace pacfno {

// Error taxonomy mirrors the CLI exit codes: config -> 1, data -> 2, numeric -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/extent violations are a config-class failure.
struct ShapeError : ConfigError {
    using ConfigError::ConfigError;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf detected in a computed tensor.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pacfno
