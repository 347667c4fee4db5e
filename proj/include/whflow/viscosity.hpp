#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "whflow/hamiltonian.hpp"

namespace whflow {

/// Monotone upwind scheme with numerical viscosity on a 1-D periodic lattice.
/// Conventions: x+ = max(x,0), x- = min(x,0); the viscosity term is the
/// undivided discrete Laplacian alpha*(S_{i+1} - 2 S_i + S_{i-1}).
struct ViscosityConfig {
    double alpha = 0.0;  ///< viscosity coefficient, in [0, 1/2)
    double tau = 0.0;    ///< time step
    double h = 0.0;      ///< lattice spacing
    double R = 0.0;      ///< gradient bound max_i |S_{i+1}-S_i| / h
};

class CflError : public std::runtime_error {
public:
    explicit CflError(const std::string& msg) : std::runtime_error(msg) {}
};

class MonotonicityError : public std::runtime_error {
public:
    explicit MonotonicityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AlphaSelection {
    double alpha = 0.0;
    double R = 0.0;
};

/// Smallest alpha satisfying the three monotonicity inequalities for the
/// current S (periodic indexing), which is R*tau/h.  Throws CflError when no
/// admissible alpha < 1/2 exists.
AlphaSelection select_alpha(std::span<const double> s, double tau, double h);

/// True iff cfg.alpha < 1/2 and the three monotonicity inequalities hold:
///   1 - (tau/h^2)((S_{i+1}-S_i)^+ + (S_{i-1}-S_i)^+) - 2 alpha >= 0
///   alpha - (tau/h^2)(S_{i+1}-S_i)^+ >= 0
///   alpha - (tau/h^2)(S_{i-1}-S_i)^+ >= 0
bool monotonicity_ok(std::span<const double> s, const ViscosityConfig& cfg);

/// One explicit step of the scheme.  The density update is assembled from
/// per-edge fluxes, so mass is conserved to rounding.  Throws
/// MonotonicityError when the cfg invariants fail for the supplied S.
State step_viscosity_upwind(const State& st, const ViscosityConfig& cfg,
                            ExecPolicy policy = ExecPolicy::Auto);

struct SteadyOptions {
    std::optional<double> fixed_alpha;  ///< nullopt: re-select alpha each step
    double tau = 0.0;
    double h = 0.0;
    double range_tol = 1e-8;
    long max_steps = 2'000'000;
};

struct SteadyResult {
    State state;
    long steps = 0;
    bool converged = false;
};

/// Iterates until max_i S_i - min_i S_i <= range_tol or max_steps.
SteadyResult run_to_steady(const State& st0, const SteadyOptions& options);

}  // namespace whflow
