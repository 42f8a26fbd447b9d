#pragma once

#include <stdexcept>
#include <string>

namespace rcrbm {

// Data or runtime failure (bad file, shape mismatch, degenerate input).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or usage; the CLI maps this to exit status 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rcrbm
