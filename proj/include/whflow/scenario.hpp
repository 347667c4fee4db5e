#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "whflow/analysis.hpp"
#include "whflow/graph.hpp"
#include "whflow/hamiltonian.hpp"
#include "whflow/integrators.hpp"

namespace whflow {

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& msg)
        : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + msg
                                      : "config: " + msg),
          line_number(line) {}
    int line_number;
};

/// Flat key = value experiment description.  Named scenarios preload the
/// reference-experiment defaults; any later key overrides.
struct ScenarioConfig {
    std::string scenario = "custom";
    double domain_length = 1.0;
    int n = 0;
    double tau = 0.0;
    double T = 0.0;
    std::string scheme = "midpoint";  // symplectic_euler|midpoint|prk:gauss2|viscosity
    double beta = 0.0;
    std::optional<double> alpha;      // viscosity coefficient; nullopt = auto
    std::string theta = "average";
    std::string theta_tilde = "logmean";
    double V_const = 0.0;
    std::string W_kind = "none";      // none|identity
    std::string rho0 = "uniform";     // catalog token
    std::string s0 = "zero";          // catalog token
    std::vector<double> rho0_values;  // explicit node values (override catalog)
    std::vector<double> s0_values;
    std::string graph_file;           // custom graphs: plain-text edge list
    std::string output_path;          // default artifact directory
    int record_every = 1;
    std::vector<double> snapshot_times;  // t=0 and t=T are always written
    double newton_tol = 1e-12;
    int newton_max_iterations = 50;
    std::string upwind_freeze = "step_start";  // step_start|per_iterate

    double h() const { return n > 0 ? domain_length / n : 0.0; }
};

struct SweepConfig {
    ScenarioConfig base;
    std::vector<double> beta_values;
    double tau_lo = 1e-4;
    double tau_hi = 0.2;
    double bisection_tol = 1e-3;
    double energy_rel_tol = 0.01;
    bool require_positivity = true;
    bool require_newton_convergence = true;
    int workers = 0;  // 0 = library default
};

struct ParsedConfig {
    std::optional<ScenarioConfig> scenario;
    std::optional<SweepConfig> sweep;
};

/// Parses the flat key = value format (# comments).  Unknown keys are
/// rejected with their line number.  The presence of `beta_values` selects a
/// sweep config.
ParsedConfig parse_config(std::istream& in);
ParsedConfig parse_config_file(const std::string& path);

/// Graph, spec, and initial state assembled from a scenario config.
struct Problem {
    WeightedGraph graph;
    HamiltonianSpec spec;
    State initial;
    std::vector<double> x;  // snapshot coordinate per node
};
Problem build_problem(const ScenarioConfig& cfg);

struct RunStats {
    bool completed = false;
    std::string failure_reason;
    double failure_time = 0.0;
    int steps_completed = 0;
    int n_steps = 0;
    double tau_effective = 0.0;
    double H0 = 0.0;
    double max_mass_error = 0.0;    // max |mass - 1|
    double max_energy_error = 0.0;  // max |H - H0|
    double final_energy_error = 0.0;
    double min_rho = 0.0;           // min over the whole run of min_i rho_i
    State final_state;
};

using RecordCallback =
    std::function<void(int step, const State&, const DiagnosticsRecord&)>;

/// Runs the configured scheme in memory; `on_record` fires for every step,
/// including step 0.  No files are written.
RunStats execute_scenario(const ScenarioConfig& cfg, const RecordCallback& on_record = {});

struct RunOutcome {
    RunStats stats;
    std::vector<std::string> artifacts;
};

/// Runs the scenario and writes diagnostics.csv plus snapshot/density CSVs
/// under out_dir.  Artifacts are deterministic for a fixed config.
RunOutcome run_scenario(const ScenarioConfig& cfg, const std::string& out_dir);

struct SweepRow {
    double beta = 0.0;
    double H0_over_beta = 0.0;
    double tau_max = 0.0;
};

/// Per beta, bisects for the largest tau whose run to T succeeds under the
/// sweep's success criterion; failures at every tau report tau_max = 0.
/// Writes sweep.csv when out_dir is nonempty.
std::vector<SweepRow> sweep_beta_tau(const SweepConfig& cfg, const std::string& out_dir);

}  // namespace whflow
