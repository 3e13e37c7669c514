#pragma once

#include <stdexcept>
#include <string>

namespace coconut {

// Invalid parameters, schema violations, size mismatches.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Diverged integration, failed root bracketing, solver non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace coconut
