#pragma once

#include <stdexcept>
#include <string>

namespace q3r {

// Bad user input: config files, CLI values, checkpoint contents, dimension
// mismatches. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown at runtime: non-finite gradients, activations or
// metrics. The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace q3r
