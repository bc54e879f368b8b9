#pragma once

#include <stdexcept>
#include <string>

namespace muxsim {

// Bad or inconsistent user input (config files, CLI arguments, physically
// impossible parameter combinations). The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed to produce a usable answer (fit divergence,
// degenerate data). The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace muxsim
