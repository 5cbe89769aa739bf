#pragma once

#include <stdexcept>
#include <string>

namespace hetsq {

// Argument outside the mathematical domain of an operation (non-positive
// rates, empty populations, degenerate windows, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A configuration the numerical machinery deliberately refuses, e.g. a
// routing weight for which the first-order condition is not monotone.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Root finder failed to bracket or converge. `diagnostics` carries a
// human-readable dump (bracket endpoints, scan values).
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::string diagnostics = {})
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

// Violated simulator invariant or a runtime singularity in an integrator.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hetsq
