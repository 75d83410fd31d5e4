#pragma once

#include <stdexcept>
#include <string>

namespace manifold_embed {

// Error categories map 1:1 onto the CLI exit codes (2/3/4).

// Bad arguments, bad configuration, violated preconditions.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable, unwritable, or malformed files.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, degenerate norms, numeric breakdown.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace manifold_embed
