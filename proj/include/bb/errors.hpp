#pragma once

#include <stdexcept>
#include <string>

namespace bb {

// Thrown when an evaluation point is inside the excluded strip around the
// coordinate singularity of the closed-loop metric, or when a simulated
// trajectory runs into it.
struct singularity_error : std::runtime_error {
    explicit singularity_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a structural precondition on inputs is violated (bad
// generator data, invalid dimensions, out-of-range tolerances, ...).
struct invariant_error : std::invalid_argument {
    explicit invariant_error(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when adaptive quadrature cannot reach its tolerance.
struct quadrature_error : std::runtime_error {
    explicit quadrature_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on malformed or inconsistent configuration input.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when the gain-matching solve fails to converge.
struct fit_error : std::runtime_error {
    explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when linearization is requested at a state that is not an
// equilibrium of the closed loop.
struct non_equilibrium_error : std::runtime_error {
    explicit non_equilibrium_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bb
