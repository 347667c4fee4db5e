#include "whflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "whflow/viscosity.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace whflow {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, int line) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected a number, got `" + v + "`");
    }
}

int parse_int(const std::string& v, int line) {
    try {
        size_t used = 0;
        int x = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected an integer, got `" + v + "`");
    }
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(line, "expected true/false, got `" + v + "`");
}

std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item, line));
    }
    if (out.empty()) throw ConfigError(line, "expected a comma-separated list");
    return out;
}

void apply_preset(ScenarioConfig& c, const std::string& name, int line) {
    const double pi = std::numbers::pi;
    if (name == "geodesic_gaussian") {
        c = ScenarioConfig{};
        c.scenario = name;
        c.domain_length = 1.0;
        c.n = 200;
        c.tau = 1e-4;
        c.T = 0.315;
        c.scheme = "midpoint";
        c.beta = 1e-5;
        c.alpha = 1.0 / 12.0;
        c.theta = "upwind";
        c.theta_tilde = "logmean";
        c.rho0 = "gaussian_bump";
        c.s0 = "log_cosh_well";
        // frozen upwind orientation stops converging in the post-singularity
        // oscillations at this beta; orient at the stage values instead
        c.upwind_freeze = "per_iterate";
    } else if (name == "geodesic_flat") {
        c = ScenarioConfig{};
        c.scenario = name;
        c.domain_length = 1.0;
        c.n = 666;
        c.tau = 1.3863e-5;
        c.T = 0.315;
        c.scheme = "midpoint";
        c.beta = 5e-7;
        c.alpha = 8e-2;
        c.theta = "upwind";
        c.theta_tilde = "logmean";
        c.rho0 = "uniform";
        c.s0 = "log_cosh_well";
        c.upwind_freeze = "per_iterate";
    } else if (name == "geodesic_sine") {
        c = ScenarioConfig{};
        c.scenario = name;
        c.domain_length = 2.0;
        c.n = 200;
        c.tau = 1e-4;
        c.T = 0.5;
        c.scheme = "midpoint";
        c.beta = 1e-4;
        c.alpha = 5e-2;
        c.theta = "upwind";
        c.theta_tilde = "logmean";
        c.rho0 = "uniform";
        c.s0 = "sin2pi_over8";
    } else if (name == "madelung") {
        c = ScenarioConfig{};
        c.scenario = name;
        c.domain_length = 1.0;
        c.n = 100;
        c.tau = 1e-3;
        c.T = 50.0;  // desk-scale default; extend via T = ...
        c.scheme = "midpoint";
        c.beta = 1.0;
        c.theta = "average";
        c.theta_tilde = "logmean";
        c.rho0 = "uniform";
        c.s0 = "sin2pi_over2";
    } else if (name == "two_node") {
        c = ScenarioConfig{};
        c.scenario = name;
        c.domain_length = 2.0;
        c.n = 2;
        c.tau = 1e-3;
        c.T = pi;
        c.scheme = "midpoint";
        c.beta = 0.0;
        c.theta = "average";
        c.theta_tilde = "logmean";
        c.W_kind = "identity";
        c.rho0_values = {0.7, 0.3};
        c.s0_values = {0.0, 0.0};
    } else if (name == "custom") {
        c = ScenarioConfig{};
        c.scenario = name;
    } else {
        throw ConfigError(line, "unknown scenario `" + name + "`");
    }
}

double catalog_rho0(const std::string& token, double x, double L, int line) {
    if (token == "uniform") return 1.0;
    if (token == "gaussian_bump") return std::exp(-10.0 * (x - 0.5 * L) * (x - 0.5 * L));
    throw ConfigError(line, "unknown rho0 profile `" + token + "`");
}

double catalog_s0(const std::string& token, double x, double L, int line) {
    const double pi = std::numbers::pi;
    (void)L;
    if (token == "zero") return 0.0;
    if (token == "log_cosh_well") return -std::log(std::cosh(5.0 * (x - 0.5 * L))) / 5.0;
    if (token == "sin2pi_over8") return std::sin(2.0 * pi * x) / 8.0;
    if (token == "sin2pi_over2") return 0.5 * std::sin(2.0 * pi * x);
    if (token == "sinpi_over_pi") return std::sin(pi * x) / pi;
    throw ConfigError(line, "unknown s0 profile `" + token + "`");
}

void validate_config(const ScenarioConfig& c) {
    if (c.scenario != "two_node" && c.scenario != "custom") {
        if (c.n < 3) throw ConfigError(0, "n must be at least 3 for periodic lattices");
    }
    if (c.n < 2) throw ConfigError(0, "n must be at least 2");
    if (!(c.domain_length > 0.0)) throw ConfigError(0, "domain_length must be positive");
    if (!(c.tau > 0.0)) throw ConfigError(0, "tau must be positive");
    if (!(c.T > 0.0)) throw ConfigError(0, "T must be positive");
    if (c.beta < 0.0) throw ConfigError(0, "beta must be nonnegative");
    if (c.record_every < 1) throw ConfigError(0, "record_every must be at least 1");
    if (!(c.newton_tol > 0.0)) throw ConfigError(0, "newton_tol must be positive");
    if (c.newton_max_iterations < 1)
        throw ConfigError(0, "newton_max_iterations must be at least 1");
    if (c.scheme != "symplectic_euler" && c.scheme != "midpoint" &&
        c.scheme != "prk:gauss2" && c.scheme != "viscosity")
        throw ConfigError(0, "unknown scheme `" + c.scheme + "`");
    if (c.upwind_freeze != "step_start" && c.upwind_freeze != "per_iterate")
        throw ConfigError(0, "upwind_freeze must be step_start or per_iterate");
    if (c.W_kind != "none" && c.W_kind != "identity")
        throw ConfigError(0, "W must be none or identity");
    make_weight_rule(c.theta);
    make_weight_rule(c.theta_tilde);
    // the runner reconciles tau and T by rounding the step count; a tau
    // larger than 2T cannot produce a single step of roughly the right size
    if (c.tau > 2.0 * c.T) throw ConfigError(0, "tau exceeds the time horizon");
}

struct KeyValue {
    std::string key, value;
    int line;
};

}  // namespace

ParsedConfig parse_config(std::istream& in) {
    std::vector<KeyValue> pairs;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line_no, "expected `key = value`");
        KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
        if (kv.key.empty()) throw ConfigError(line_no, "empty key");
        if (kv.value.empty()) throw ConfigError(line_no, "empty value for `" + kv.key + "`");
        pairs.push_back(std::move(kv));
    }

    ScenarioConfig cfg;
    bool scenario_seen = false;
    for (const KeyValue& kv : pairs)
        if (kv.key == "scenario") {
            if (scenario_seen) throw ConfigError(kv.line, "scenario given twice");
            apply_preset(cfg, kv.value, kv.line);
            scenario_seen = true;
        }

    bool is_sweep = false;
    SweepConfig sweep;
    for (const KeyValue& kv : pairs)
        if (kv.key == "beta_values") is_sweep = true;

    for (const KeyValue& kv : pairs) {
        const std::string& k = kv.key;
        const std::string& v = kv.value;
        const int ln = kv.line;
        if (k == "scenario") continue;
        if (k == "domain_length") cfg.domain_length = parse_double(v, ln);
        else if (k == "n") cfg.n = parse_int(v, ln);
        else if (k == "tau") cfg.tau = parse_double(v, ln);
        else if (k == "T") cfg.T = parse_double(v, ln);
        else if (k == "scheme") cfg.scheme = v;
        else if (k == "beta") cfg.beta = parse_double(v, ln);
        else if (k == "alpha") {
            if (v == "auto") cfg.alpha.reset();
            else cfg.alpha = parse_double(v, ln);
        }
        else if (k == "theta") cfg.theta = v;
        else if (k == "theta_tilde") cfg.theta_tilde = v;
        else if (k == "V") cfg.V_const = parse_double(v, ln);
        else if (k == "W") cfg.W_kind = v;
        else if (k == "rho0") cfg.rho0 = v;
        else if (k == "s0") cfg.s0 = v;
        else if (k == "rho0_values") cfg.rho0_values = parse_list(v, ln);
        else if (k == "s0_values") cfg.s0_values = parse_list(v, ln);
        else if (k == "graph") cfg.graph_file = v;
        else if (k == "output_path") cfg.output_path = v;
        else if (k == "record_every") cfg.record_every = parse_int(v, ln);
        else if (k == "snapshot_times") cfg.snapshot_times = parse_list(v, ln);
        else if (k == "newton_tol") cfg.newton_tol = parse_double(v, ln);
        else if (k == "newton_max_iterations") cfg.newton_max_iterations = parse_int(v, ln);
        else if (k == "upwind_freeze") cfg.upwind_freeze = v;
        else if (k == "beta_values") sweep.beta_values = parse_list(v, ln);
        else if (k == "tau_lo") sweep.tau_lo = parse_double(v, ln);
        else if (k == "tau_hi") sweep.tau_hi = parse_double(v, ln);
        else if (k == "bisection_tol") sweep.bisection_tol = parse_double(v, ln);
        else if (k == "energy_rel_tol") sweep.energy_rel_tol = parse_double(v, ln);
        else if (k == "require_positivity") sweep.require_positivity = parse_bool(v, ln);
        else if (k == "require_newton_convergence")
            sweep.require_newton_convergence = parse_bool(v, ln);
        else if (k == "workers") sweep.workers = parse_int(v, ln);
        else throw ConfigError(ln, "unknown key `" + k + "`");
    }

    ParsedConfig out;
    if (is_sweep) {
        if (!(sweep.tau_lo > 0.0) || sweep.tau_lo > sweep.tau_hi)
            throw ConfigError(0, "need 0 < tau_lo <= tau_hi");
        if (!(sweep.bisection_tol > 0.0))
            throw ConfigError(0, "bisection_tol must be positive");
        cfg.tau = sweep.tau_lo;  // tau is bisected per run
        validate_config(cfg);
        sweep.base = cfg;
        out.sweep = std::move(sweep);
    } else {
        validate_config(cfg);
        out.scenario = std::move(cfg);
    }
    return out;
}

ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file: " + path);
    return parse_config(in);
}

Problem build_problem(const ScenarioConfig& cfg) {
    std::optional<WeightedGraph> graph;
    if (!cfg.graph_file.empty()) {
        graph = load_graph(cfg.graph_file);
    } else if (cfg.scenario == "two_node") {
        graph = build_lattice_1d(2, 1.0, LatticeBoundary::Path);
    } else {
        graph = build_lattice_1d(cfg.n, cfg.h(), LatticeBoundary::Periodic);
    }
    const int n = graph->n_nodes();
    if (cfg.graph_file.empty() && n != cfg.n && cfg.scenario != "two_node")
        throw ConfigError(0, "graph size does not match n");

    Problem p{std::move(*graph), {}, {}, {}};
    p.x.resize(static_cast<size_t>(n));
    if (p.graph.has_positions())
        p.x = p.graph.node_positions();
    else
        for (int i = 0; i < n; ++i) p.x[static_cast<size_t>(i)] = i;

    p.spec.beta = cfg.beta;
    p.spec.theta = make_weight_rule(cfg.theta);
    p.spec.theta_tilde = make_weight_rule(cfg.theta_tilde);
    if (cfg.V_const != 0.0) p.spec.V.assign(static_cast<size_t>(n), cfg.V_const);
    if (cfg.W_kind == "identity") {
        p.spec.W.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
        for (int i = 0; i < n; ++i) p.spec.W[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
    }
    validate_spec(p.graph, p.spec);

    State st;
    st.rho.resize(static_cast<size_t>(n));
    st.s.resize(static_cast<size_t>(n));
    if (!cfg.rho0_values.empty()) {
        if (cfg.rho0_values.size() != static_cast<size_t>(n))
            throw ConfigError(0, "rho0_values size does not match n");
        st.rho = cfg.rho0_values;
    } else {
        // node probability = sampled density * h, then renormalized
        for (int i = 0; i < n; ++i)
            st.rho[static_cast<size_t>(i)] =
                catalog_rho0(cfg.rho0, p.x[static_cast<size_t>(i)], cfg.domain_length, 0) *
                cfg.h();
    }
    double mass = accurate_sum(st.rho);
    if (!(mass > 0.0)) throw ConfigError(0, "initial density has nonpositive mass");
    for (double& r : st.rho) r /= mass;

    if (!cfg.s0_values.empty()) {
        if (cfg.s0_values.size() != static_cast<size_t>(n))
            throw ConfigError(0, "s0_values size does not match n");
        st.s = cfg.s0_values;
    } else {
        for (int i = 0; i < n; ++i)
            st.s[static_cast<size_t>(i)] =
                catalog_s0(cfg.s0, p.x[static_cast<size_t>(i)], cfg.domain_length, 0);
    }
    p.initial = std::move(st);
    return p;
}

RunStats execute_scenario(const ScenarioConfig& cfg, const RecordCallback& on_record) {
    Problem p = build_problem(cfg);
    RunStats stats;
    stats.n_steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.tau)));
    stats.tau_effective = cfg.T / stats.n_steps;
    const double tau = stats.tau_effective;

    stats.H0 = energy_breakdown(p.graph, p.spec, p.initial).total;
    stats.min_rho = *std::min_element(p.initial.rho.begin(), p.initial.rho.end());

    auto track = [&](int step, const State& st, int newton_its) {
        DiagnosticsRecord rec = record_diagnostics(p.graph, p.spec, st, stats.H0, newton_its);
        stats.max_mass_error = std::max(stats.max_mass_error, std::abs(rec.mass - 1.0));
        stats.max_energy_error = std::max(stats.max_energy_error, std::abs(rec.energy_error));
        stats.final_energy_error = rec.energy_error;
        stats.min_rho = std::min(stats.min_rho, rec.min_rho);
        if (on_record) on_record(step, st, rec);
    };
    track(0, p.initial, 0);

    if (cfg.scheme == "viscosity") {
        State cur = p.initial;
        try {
            for (int k = 1; k <= stats.n_steps; ++k) {
                ViscosityConfig vc;
                vc.tau = tau;
                vc.h = cfg.h();
                if (cfg.alpha) {
                    vc.alpha = *cfg.alpha;
                    double max_abs = 0.0;
                    const int n = p.graph.n_nodes();
                    for (int i = 0; i < n; ++i) {
                        const int ip = (i + 1) % n;
                        max_abs = std::max(max_abs,
                                           std::abs(cur.s[static_cast<size_t>(ip)] -
                                                    cur.s[static_cast<size_t>(i)]));
                    }
                    vc.R = max_abs / vc.h;
                } else {
                    AlphaSelection sel = select_alpha(cur.s, tau, vc.h);
                    vc.alpha = sel.alpha;
                    vc.R = sel.R;
                }
                cur = step_viscosity_upwind(cur, vc);
                cur.t = k * tau;
                stats.steps_completed = k;
                track(k, cur, 0);
            }
            stats.completed = true;
        } catch (const std::runtime_error& err) {
            stats.completed = false;
            stats.failure_reason = err.what();
            stats.failure_time = stats.steps_completed * tau;
        }
        stats.final_state = std::move(cur);
        return stats;
    }

    SolverConfig scfg;
    scfg.residual_tol = cfg.newton_tol;
    scfg.max_iterations = cfg.newton_max_iterations;
    scfg.upwind_freeze = cfg.upwind_freeze == "per_iterate" ? UpwindFreeze::PerIterate
                                                            : UpwindFreeze::StepStart;
    Stepper stepper = make_stepper(p.graph, p.spec, cfg.scheme, scfg);

    std::vector<Observer> observers;
    observers.push_back([&](int step, const State& st, const StepReport& rep) {
        stats.steps_completed = step;
        track(step, st, rep.newton_iterations);
    });
    IntegrateOptions opts;
    opts.record_every = std::max(1, stats.n_steps);  // states tracked via observer
    Trajectory tr =
        integrate(p.graph, p.spec, stepper, p.initial, tau, stats.n_steps, observers, opts);
    stats.completed = tr.completed;
    if (!tr.completed) {
        stats.failure_reason = tr.failure == StepStatus::PositivityFailure
                                   ? "positivity failure (step rejected)"
                                   : "newton failure (non-convergence)";
        stats.failure_time = (tr.steps_completed + 1) * tau;
    }
    stats.final_state = tr.states.back();
    return stats;
}

namespace {

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string time_label(double t) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", t);
    return buf;
}

}  // namespace

RunOutcome run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    RunOutcome out;

    const int n_steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.tau)));
    const double tau = cfg.T / n_steps;
    std::map<int, double> snapshot_steps;
    snapshot_steps[0] = 0.0;
    snapshot_steps[n_steps] = cfg.T;
    for (double t : cfg.snapshot_times) {
        int k = static_cast<int>(std::llround(t / tau));
        k = std::clamp(k, 0, n_steps);
        snapshot_steps.emplace(k, k * tau);
    }

    const std::string diag_path = (fs::path(out_dir) / "diagnostics.csv").string();
    std::ofstream diag(diag_path);
    diag << "t,mass,H,energy_error,K,I,V,W,min_rho,newton_iters\n";
    out.artifacts.push_back(diag_path);

    Problem p = build_problem(cfg);  // for x coordinates and h
    auto write_snapshot = [&](const State& st, double t) {
        const std::string label = time_label(t);
        const std::string snap_path =
            (fs::path(out_dir) / ("snapshot_t" + label + ".csv")).string();
        std::ofstream snap(snap_path);
        snap << "x,rho,s\n";
        for (size_t i = 0; i < st.rho.size(); ++i)
            snap << format_g(p.x[i]) << "," << format_g(st.rho[i]) << ","
                 << format_g(st.s[i]) << "\n";
        out.artifacts.push_back(snap_path);
        // density view of the same state, for comparison with continuum plots
        const std::string dens_path =
            (fs::path(out_dir) / ("density_t" + label + ".csv")).string();
        std::ofstream dens(dens_path);
        dens << "x,density\n";
        const double h = cfg.h();
        for (size_t i = 0; i < st.rho.size(); ++i)
            dens << format_g(p.x[i]) << "," << format_g(st.rho[i] / h) << "\n";
        out.artifacts.push_back(dens_path);
    };

    RecordCallback cb = [&](int step, const State& st, const DiagnosticsRecord& rec) {
        if (step % cfg.record_every == 0 || step == n_steps) {
            diag << format_g(rec.t) << "," << format_g(rec.mass) << "," << format_g(rec.H)
                 << "," << format_g(rec.energy_error) << "," << format_g(rec.kinetic)
                 << "," << format_g(rec.fisher) << "," << format_g(rec.potential) << ","
                 << format_g(rec.interaction) << "," << format_g(rec.min_rho) << ","
                 << rec.newton_iterations << "\n";
        }
        auto it = snapshot_steps.find(step);
        if (it != snapshot_steps.end()) write_snapshot(st, it->second);
    };
    out.stats = execute_scenario(cfg, cb);
    return out;
}

std::vector<SweepRow> sweep_beta_tau(const SweepConfig& cfg, const std::string& out_dir) {
    const size_t nb = cfg.beta_values.size();
    std::vector<SweepRow> rows(nb);

    auto run_succeeds = [&cfg](double beta, double tau) {
        ScenarioConfig c = cfg.base;
        c.beta = beta;
        const int n_steps =
            std::max(1, static_cast<int>(std::llround(c.T / tau)));
        c.tau = c.T / n_steps;
        RunStats stats = execute_scenario(c);
        if (!stats.completed) return std::make_pair(false, stats.H0);
        if (cfg.require_positivity && !(stats.min_rho > 0.0))
            return std::make_pair(false, stats.H0);
        const bool energy_ok = std::abs(stats.final_energy_error) <=
                               cfg.energy_rel_tol * std::max(std::abs(stats.H0), 1.0);
        return std::make_pair(energy_ok, stats.H0);
    };

    const int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(nb);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, std::min(workers, static_cast<int>(nb))))
#endif
    for (long long bi = 0; bi < static_cast<long long>(nb); ++bi) {
        const double beta = cfg.beta_values[static_cast<size_t>(bi)];
        double lo = cfg.tau_lo, hi = cfg.tau_hi;
        auto [hi_ok, h0] = run_succeeds(beta, hi);
        double tau_max;
        if (hi_ok) {
            tau_max = hi;
        } else {
            auto [lo_ok, h0_lo] = run_succeeds(beta, lo);
            h0 = h0_lo;
            if (!lo_ok) {
                tau_max = 0.0;
            } else {
                while (hi - lo > cfg.bisection_tol) {
                    const double mid = 0.5 * (lo + hi);
                    if (run_succeeds(beta, mid).first)
                        lo = mid;
                    else
                        hi = mid;
                }
                tau_max = lo;
            }
        }
        rows[static_cast<size_t>(bi)] =
            SweepRow{beta, beta > 0.0 ? h0 / beta : 0.0, tau_max};
    }
    (void)workers;

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv((fs::path(out_dir) / "sweep.csv").string());
        csv << "beta,H0_over_beta,tau_max\n";
        for (const SweepRow& r : rows)
            csv << format_g(r.beta) << "," << format_g(r.H0_over_beta) << ","
                << format_g(r.tau_max) << "\n";
    }
    return rows;
}

}  // namespace whflow
