#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "whflow/graph.hpp"
#include "whflow/weights.hpp"

namespace whflow {

/// Discrete energy H(rho,S) = K(S,rho) + beta*I(rho) + V(rho) + W(rho).
struct HamiltonianSpec {
    double beta = 0.0;                    ///< Fisher-information coefficient
    std::vector<double> V;                ///< per-node linear potential; empty = zero
    std::vector<std::vector<double>> W;   ///< symmetric interaction matrix; empty = none
    WeightRule theta{WeightKind::Average};        ///< kinetic edge weight
    WeightRule theta_tilde{WeightKind::LogMean};  ///< Fisher edge weight
};

/// Throws std::invalid_argument if sizes mismatch, W is asymmetric, beta < 0,
/// or theta_tilde is Upwind (the Fisher weight must be a symmetric function
/// of the densities alone).
void validate_spec(const WeightedGraph& g, const HamiltonianSpec& spec);

/// Canonical phase-space point: node probabilities and node potentials.
struct State {
    std::vector<double> rho;
    std::vector<double> s;
    double t = 0.0;
};

/// First violated State invariant (sizes, positivity, unit mass), or nullopt.
std::optional<std::string> validate_state(const WeightedGraph& g, const State& st,
                                          double mass_tol = 1e-9);

/// Kernel dispatch: Auto parallelizes node loops via OpenMP above a size
/// threshold; Serial is the reference implementation.  Per-entry arithmetic
/// is identical in both paths.
enum class ExecPolicy { Auto, Serial, Parallel };

struct EnergyBreakdown {
    double kinetic = 0.0;
    double fisher = 0.0;       // I(rho), not multiplied by beta
    double potential = 0.0;
    double interaction = 0.0;
    double total = 0.0;        // kinetic + beta*fisher + potential + interaction
};

/// When theta is Upwind, `s_orient` (if nonempty) supplies the potentials used
/// to orient the weights; integrators freeze it at the step start.
EnergyBreakdown energy_breakdown(const WeightedGraph& g, const HamiltonianSpec& spec,
                                 const State& st, std::span<const double> s_orient = {},
                                 ExecPolicy policy = ExecPolicy::Auto);

/// Discrete Fisher information I(rho) >= 0; zero exactly at uniform rho.
double fisher_information(const WeightedGraph& g, const HamiltonianSpec& spec,
                          std::span<const double> rho,
                          ExecPolicy policy = ExecPolicy::Auto);

/// dI/drho_i.  For theta_tilde = LogMean this is sum_j w~_ij phi(rho_j/rho_i)
/// with phi(t) = 1 - t - log t; general rules use the product-rule expansion.
std::vector<double> fisher_gradient(const WeightedGraph& g, const HamiltonianSpec& spec,
                                    std::span<const double> rho,
                                    ExecPolicy policy = ExecPolicy::Auto);

/// dH/dS_i = sum_j w_ij (S_i - S_j) theta_ij(rho).
void grad_s(const WeightedGraph& g, const HamiltonianSpec& spec,
            std::span<const double> rho, std::span<const double> s,
            std::span<double> out, std::span<const double> s_orient = {},
            ExecPolicy policy = ExecPolicy::Auto);

/// dH/drho_i = 1/2 sum_j w_ij (S_i-S_j)^2 dtheta_ij/drho_i
///             + beta dI/drho_i + V_i + sum_j W_ij rho_j.
void grad_rho(const WeightedGraph& g, const HamiltonianSpec& spec,
              std::span<const double> rho, std::span<const double> s,
              std::span<double> out, std::span<const double> s_orient = {},
              ExecPolicy policy = ExecPolicy::Auto);

/// Canonical vector field of the flow: drho/dt = dH/dS, dS/dt = -dH/drho.
void vector_field(const WeightedGraph& g, const HamiltonianSpec& spec, const State& st,
                  std::span<double> drho_dt, std::span<double> ds_dt,
                  std::span<const double> s_orient = {},
                  ExecPolicy policy = ExecPolicy::Auto);

struct Triplet {
    int r = 0;
    int c = 0;
    double v = 0.0;
};

/// Second-derivative blocks for Newton solves.  Coordinates may repeat;
/// consumers accumulate.
///   h_ss[i][k]      = d^2 H / dS_i dS_k
///   h_s_rho[i][k]   = d^2 H / dS_i drho_k
///   h_rho_rho[i][k] = d^2 H / drho_i drho_k
void hessian_blocks(const WeightedGraph& g, const HamiltonianSpec& spec,
                    std::span<const double> rho, std::span<const double> s,
                    std::span<const double> s_orient,
                    std::vector<Triplet>& h_ss, std::vector<Triplet>& h_s_rho,
                    std::vector<Triplet>& h_rho_rho);

}  // namespace whflow
