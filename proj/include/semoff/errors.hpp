#ifndef SEMOFF_ERRORS_HPP
#define SEMOFF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace semoff {

/// Invalid or inconsistent scenario parameters. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required file (checkpoint, table) is absent. Maps to CLI exit code 3.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values during training or evaluation. Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or parameter-vector shapes that do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace semoff

#endif // SEMOFF_ERRORS_HPP
