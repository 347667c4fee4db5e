#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <utility>

#include "whflow/graph.hpp"
#include "whflow/hamiltonian.hpp"
#include "whflow/integrators.hpp"

namespace whflow {

/// Inputs of the density lower bounds.  M = H0 - min_potential; the bounds
/// assume unit Fisher edge weights, so M is rescaled by 1/min_omega_tilde.
struct BoundInputs {
    double H0 = 0.0;
    double min_potential = 0.0;
    double M = 0.0;
    double beta = 0.0;
    int N = 0;
    int kappa = 0;
    int d_max = 0;
    double min_rho0 = 0.0;
    double min_omega_tilde = 1.0;
};

BoundInputs make_bound_inputs(const WeightedGraph& g, const HamiltonianSpec& spec,
                              const State& st0);

struct LowerBound {
    double value = 0.0;
    /// True when min rho0 < 1/N (the hypothesis of the bound propositions).
    /// When false the formula branch is still a valid barrier and is returned
    /// through the same min(.., half the initial minimum).
    bool hypothesis_holds = true;
};

/// Periodic nearest-neighbor barrier:
///   min( min_rho0/2, 1 / (1 + N exp(M (N-1) (floor((N-1)/2)+1) / beta)) ).
/// Throws std::invalid_argument when beta <= 0.
LowerBound lower_bound_periodic(const BoundInputs& b);

/// Barrier for graphs with kappa >= 2 boundary nodes:
///   min( min_rho0/2, 1 / (1 + kappa (d_max-1) exp(2 M (d_max-1)(N-1) / beta)) ).
/// Throws std::invalid_argument when kappa < 2 (route periodic graphs to the
/// periodic variant).
LowerBound lower_bound_boundary(const BoundInputs& b);

/// Space-time step-size restriction
///   tau <= safety * min(1/C0, (1/C0) sqrt(c c0 / M), (1/C0) c^2/(beta(1+c+M0 c^2))).
/// Terms with M = 0 or beta = 0 drop out.
double step_size_bound(double c, double c0, double C0, double M, double M0,
                       double beta, double safety = 1.0);

struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    double H = 0.0;
    double energy_error = 0.0;
    double kinetic = 0.0;
    double fisher = 0.0;
    double potential = 0.0;
    double interaction = 0.0;
    double min_rho = 0.0;
    int newton_iterations = 0;
};

DiagnosticsRecord record_diagnostics(const WeightedGraph& g, const HamiltonianSpec& spec,
                                     const State& st, double H0,
                                     int newton_iterations = 0);

/// Compensated (Neumaier) sum; used for the mass diagnostic.
double accurate_sum(std::span<const double> values);

/// Entrywise max norm of J^T Omega J - Omega, with J the step Jacobian in the
/// 2n coordinates (rho | S) assembled by central finite differences and Omega
/// the canonical antisymmetric pairing of rho with S.
double symplecticity_defect(const std::function<State(const State&)>& step_map,
                            const State& st, double fd_eps);

/// Convenience overload running one stepper step of size tau; throws
/// std::runtime_error if any perturbed step fails.
double symplecticity_defect(const Stepper& stepper, const WeightedGraph& g,
                            const HamiltonianSpec& spec, const State& st, double tau,
                            double fd_eps);

/// Exact solution of the two-node system with unit weights, theta the
/// arithmetic average, and quadratic potential (rho1^2 + rho2^2)/2:
///   rho1(t) = 1/2 + cos(t)(rho1_0-rho2_0)/2 + sin(t)(s1_0-s2_0)/2,
/// S components reconstructed by integrating
///   d(S1+S2)/dt = -(S1-S2)^2/2 - 1 in closed form.
/// Pre: rho1 + rho2 = 1.  The returned densities may leave the simplex; the
/// caller checks positivity (that failure mode is the point of the example).
State two_node_closed_form(std::array<double, 2> rho0, std::array<double, 2> s0,
                           double t);

class BlowupError : public std::domain_error {
public:
    BlowupError(const std::string& msg, double t_star_)
        : std::domain_error(msg), t_star(t_star_) {}
    double t_star;
};

/// Exact solution of the unregularized two-node upwind system for s1 > s2:
///   S1 - S2 = v0 / (1 - v0 t / 2), rho2(t) = rho2_0 (1 - v0 t / 2)^2,
/// blowing up at t* = 2/v0.  Throws BlowupError for t >= t*.
State two_node_upwind_blowup(std::array<double, 2> rho0, std::array<double, 2> s0,
                             double t);

/// Smooth periodic function on [0,1] with its first two derivatives.
struct SmoothField {
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
};

/// Samples the fields on the periodic lattice of spacing h, evaluates the
/// graph vector field, subtracts the analytic PDE right-hand side
///   drho/dt = -(rho S')',  dS/dt = -S'^2/2 - beta ((rho'/rho)^2 - 2 rho''/rho),
/// and returns the max-norm residuals (rho equation, S equation).
std::pair<double, double> consistency_residual(double h, const SmoothField& rho,
                                               const SmoothField& s,
                                               const HamiltonianSpec& spec);

}  // namespace whflow
