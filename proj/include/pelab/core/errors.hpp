#pragma once

#include <stdexcept>
#include <string>

namespace pelab {

/// Base error. Carries the name of the module that raised it so the CLI can
/// tag messages ("bsde: generator overflow ...").
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

    [[nodiscard]] const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Bad input: model bounds, claim bounds, grid parameters, config keys.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failure inside a numerical routine (overflow, non-convergence, rank loss).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace pelab
