#pragma once

#include <stdexcept>
#include <string>

namespace cupgan {

// Base class for all library errors. The CLI maps subclasses onto its
// exit-code contract: usage/config/data problems exit 2, runtime and
// numeric failures exit 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor or image shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration values or unknown config keys.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Missing files, undecodable images, empty datasets.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Corrupt checkpoint archives or checkpoint/config mismatches.
class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

// Non-finite values in a place that must stay finite.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace cupgan
