#pragma once

#include <stdexcept>

namespace hpm {

/// Bad configuration or command usage (CLI exit code 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Missing, malformed or incompatible input data (CLI exit code 2).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values reached the training loop (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hpm
