#pragma once

#include <stdexcept>
#include <string>

namespace tvc {

struct DimensionMismatchError : std::runtime_error {
    explicit DimensionMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SequenceOverflowError : std::runtime_error {
    explicit SequenceOverflowError(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfRangeError : std::runtime_error {
    explicit OutOfRangeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NormalizationError : std::runtime_error {
    explicit NormalizationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CaptureMissingError : std::runtime_error {
    explicit CaptureMissingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientPointsError : std::runtime_error {
    explicit InsufficientPointsError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleConfigError : std::runtime_error {
    explicit InfeasibleConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tvc
