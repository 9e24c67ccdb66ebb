#pragma once

#include <stdexcept>
#include <string>

namespace nkpsaf {

// Shapes of vectors/matrices do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A scalar parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A recording or impulse-response file could not be read.
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An experiment configuration is invalid. The message names the field.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument("config field '" + field + "': " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace nkpsaf
