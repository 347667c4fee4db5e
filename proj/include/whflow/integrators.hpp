#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "whflow/graph.hpp"
#include "whflow/hamiltonian.hpp"

namespace whflow {

/// Partitioned Runge-Kutta coefficients.  `a` drives the density stages,
/// `a_tilde` the potential stages (both row-major stages x stages).  A pair is
/// symplectic when a_tilde[i][j]*b[i] + a[j][i]*b[j] = b[i]*b[j] for all i,j.
struct Tableau {
    int stages = 0;
    std::vector<double> a;
    std::vector<double> a_tilde;
    std::vector<double> b;
    std::vector<double> c;

    double A(int i, int j) const { return a[static_cast<size_t>(i * stages + j)]; }
    double At(int i, int j) const { return a_tilde[static_cast<size_t>(i * stages + j)]; }

    static Tableau symplectic_euler();
    static Tableau implicit_midpoint();
    static Tableau gauss2();
    static Tableau explicit_euler();  ///< non-symplectic negative control
    static Tableau by_name(std::string_view name);
};

bool check_tableau_symplectic(const Tableau& t, double tol);

enum class JacobianMode { Analytic, FiniteDifference };
enum class UpwindFreeze { StepStart, PerIterate };

struct SolverConfig {
    double residual_tol = 1e-12;     ///< Newton stop, max norm of the residual
    int max_iterations = 50;
    JacobianMode jacobian_mode = JacobianMode::Analytic;
    UpwindFreeze upwind_freeze = UpwindFreeze::StepStart;
    bool allow_nonsymplectic = false;  ///< required to run a non-symplectic tableau
};

enum class StepStatus { Ok, NewtonFailure, PositivityFailure };

struct StepReport {
    StepStatus status = StepStatus::Ok;
    int newton_iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

struct StepResult {
    State state;
    StepReport report;
    bool ok() const { return report.status == StepStatus::Ok; }
};

/// One step of the symplectic Euler pair: S implicit at the old density,
/// then the density update explicit at the new potential.
StepResult step_symplectic_euler(const WeightedGraph& g, const HamiltonianSpec& spec,
                                 const State& st, double tau, const SolverConfig& cfg);

/// One step of the implicit midpoint rule (2n-dimensional Newton solve).
StepResult step_implicit_midpoint(const WeightedGraph& g, const HamiltonianSpec& spec,
                                  const State& st, double tau, const SolverConfig& cfg);

/// General partitioned Runge-Kutta step on stacked stage unknowns.  Rejects
/// non-symplectic tableaux unless cfg.allow_nonsymplectic is set.
StepResult step_prk(const WeightedGraph& g, const HamiltonianSpec& spec,
                    const Tableau& tableau, const State& st, double tau,
                    const SolverConfig& cfg);

using Stepper = std::function<StepResult(const State&, double)>;

/// Config tokens: "symplectic_euler", "midpoint", "prk:gauss2",
/// "prk:explicit_euler".  The returned closure references g and spec; they
/// must outlive it.
Stepper make_stepper(const WeightedGraph& g, const HamiltonianSpec& spec,
                     std::string_view token, const SolverConfig& cfg);

using Observer = std::function<void(int step, const State&, const StepReport&)>;

struct IntegrateOptions {
    int record_every = 1;  ///< thinning of the stored state series
};

struct Trajectory {
    std::vector<State> states;  ///< thinned series; always contains st0 and the last state
    int steps_completed = 0;
    bool completed = false;
    StepStatus failure = StepStatus::Ok;
    StepReport last_report;
};

/// Applies the stepper n_steps times, invoking every observer after each
/// successful step; aborts on step failure and returns the partial trajectory.
Trajectory integrate(const WeightedGraph& g, const HamiltonianSpec& spec,
                     const Stepper& stepper, const State& st0, double tau, int n_steps,
                     const std::vector<Observer>& observers = {},
                     const IntegrateOptions& options = {});

}  // namespace whflow
