// whflow command-line runner: reproduces the geodesic / Madelung experiments
// and the beta-tau sweep, and prints the two-node closed-form oracles.
//
// Exit codes: 0 success, 2 step failure, 3 config error.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "whflow/analysis.hpp"
#include "whflow/scenario.hpp"

namespace {

int cmd_run(const std::string& config_path, std::string out_dir) {
    whflow::ParsedConfig parsed = whflow::parse_config_file(config_path);
    if (!parsed.scenario) {
        std::cerr << "config describes a sweep; use `whflow sweep`\n";
        return 3;
    }
    if (out_dir.empty()) out_dir = parsed.scenario->output_path;
    if (out_dir.empty()) {
        std::cerr << "no output directory (pass --out or set output_path)\n";
        return 3;
    }
    whflow::RunOutcome outcome = whflow::run_scenario(*parsed.scenario, out_dir);
    for (const std::string& a : outcome.artifacts) std::cout << a << "\n";
    if (!outcome.stats.completed) {
        std::cerr << "step failure at t = " << outcome.stats.failure_time << ": "
                  << outcome.stats.failure_reason << "\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, std::string out_dir) {
    whflow::ParsedConfig parsed = whflow::parse_config_file(config_path);
    if (!parsed.sweep) {
        std::cerr << "config describes a single run; use `whflow run`\n";
        return 3;
    }
    if (out_dir.empty()) out_dir = parsed.sweep->base.output_path;
    if (out_dir.empty()) {
        std::cerr << "no output directory (pass --out or set output_path)\n";
        return 3;
    }
    auto rows = whflow::sweep_beta_tau(*parsed.sweep, out_dir);
    std::printf("beta,H0_over_beta,tau_max\n");
    for (const auto& r : rows)
        std::printf("%.17g,%.17g,%.17g\n", r.beta, r.H0_over_beta, r.tau_max);
    return 0;
}

int cmd_oracle_two_node(double t, std::vector<double> rho0, std::vector<double> s0,
                        bool upwind) {
    if (rho0.size() != 2 || s0.size() != 2) {
        std::cerr << "--rho0 and --s0 take two comma-separated values\n";
        return 3;
    }
    whflow::State st;
    try {
        st = upwind
                 ? whflow::two_node_upwind_blowup({rho0[0], rho0[1]}, {s0[0], s0[1]}, t)
                 : whflow::two_node_closed_form({rho0[0], rho0[1]}, {s0[0], s0[1]}, t);
    } catch (const whflow::BlowupError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    std::printf("t,rho1,rho2,s1,s2\n");
    std::printf("%.17g,%.17g,%.17g,%.17g,%.17g\n", st.t, st.rho[0], st.rho[1], st.s[0],
                st.s[1]);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein-Hamiltonian flows on graphs"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto* run = app.add_subcommand("run", "run one scenario and write CSV artifacts");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "bisect the largest stable tau per beta");
    sweep->add_option("--config", config_path, "sweep config file")->required();
    sweep->add_option("--out", out_dir, "output directory");

    auto* oracle = app.add_subcommand("oracle", "closed-form reference solutions");
    double t = 0.0;
    std::vector<double> rho0{0.7, 0.3}, s0{0.0, 0.0};
    bool upwind = false;
    auto* two = oracle->add_subcommand("two-node", "two-node closed form");
    two->add_option("--t", t, "evaluation time")->required();
    two->add_option("--rho0", rho0, "initial densities")->delimiter(',');
    two->add_option("--s0", s0, "initial potentials")->delimiter(',');
    two->add_flag("--upwind", upwind, "unregularized upwind blow-up solution");
    oracle->require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (oracle->parsed()) return cmd_oracle_two_node(t, rho0, s0, upwind);
    } catch (const whflow::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 3;
}
