// The OpenMP kernels must agree with the serial reference implementations:
// node-parallel loops bitwise (identical per-entry arithmetic), reductions and
// the flux-form viscosity update to accumulation rounding.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "whflow/hamiltonian.hpp"
#include "whflow/viscosity.hpp"

using namespace whflow;

namespace {

constexpr double kPi = std::numbers::pi;

State big_state(int n) {
    State st;
    st.rho.resize(static_cast<size_t>(n));
    st.s.resize(static_cast<size_t>(n));
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / n;
        st.rho[static_cast<size_t>(i)] = 1.0 + 0.4 * std::sin(2 * kPi * x) +
                                         0.1 * std::cos(6 * kPi * x);
        mass += st.rho[static_cast<size_t>(i)];
        st.s[static_cast<size_t>(i)] = 0.3 * std::cos(2 * kPi * x);
    }
    for (double& r : st.rho) r /= mass;
    return st;
}

}  // namespace

TEST_CASE("parallel node kernels are bitwise equal to the serial reference") {
    const int n = 50'000;
    WeightedGraph g = build_lattice_1d(n, 1.0 / n, LatticeBoundary::Periodic);
    State st = big_state(n);
    for (WeightKind theta : {WeightKind::Average, WeightKind::LogMean, WeightKind::Upwind}) {
        HamiltonianSpec spec;
        spec.beta = 0.7;
        spec.theta = WeightRule{theta};
        spec.theta_tilde = WeightRule{WeightKind::LogMean};
        std::vector<double> dr_s(n), ds_s(n), dr_p(n), ds_p(n);
        vector_field(g, spec, st, dr_s, ds_s, {}, ExecPolicy::Serial);
        vector_field(g, spec, st, dr_p, ds_p, {}, ExecPolicy::Parallel);
        for (int i = 0; i < n; ++i) {
            CHECK(dr_s[static_cast<size_t>(i)] == dr_p[static_cast<size_t>(i)]);
            CHECK(ds_s[static_cast<size_t>(i)] == ds_p[static_cast<size_t>(i)]);
        }
        auto fg_s = fisher_gradient(g, spec, st.rho, ExecPolicy::Serial);
        auto fg_p = fisher_gradient(g, spec, st.rho, ExecPolicy::Parallel);
        for (int i = 0; i < n; ++i)
            CHECK(fg_s[static_cast<size_t>(i)] == fg_p[static_cast<size_t>(i)]);
    }
}

TEST_CASE("parallel reductions agree with the serial energies") {
    const int n = 50'000;
    WeightedGraph g = build_lattice_1d(n, 1.0 / n, LatticeBoundary::Periodic);
    State st = big_state(n);
    HamiltonianSpec spec;
    spec.beta = 1.0;
    EnergyBreakdown a = energy_breakdown(g, spec, st, {}, ExecPolicy::Serial);
    EnergyBreakdown b = energy_breakdown(g, spec, st, {}, ExecPolicy::Parallel);
    CHECK(b.kinetic == doctest::Approx(a.kinetic).epsilon(1e-13));
    CHECK(b.fisher == doctest::Approx(a.fisher).epsilon(1e-13));
    CHECK(fisher_information(g, spec, st.rho, ExecPolicy::Parallel) ==
          doctest::Approx(fisher_information(g, spec, st.rho, ExecPolicy::Serial))
              .epsilon(1e-13));
}

TEST_CASE("viscosity step: node-parallel form vs flux-form reference") {
    const int n = 50'000;
    State st = big_state(n);
    ViscosityConfig cfg;
    cfg.h = 1.0 / n;
    cfg.tau = 1e-12;  // keep lambda*dS admissible at this resolution
    cfg.alpha = 0.2;
    State a = step_viscosity_upwind(st, cfg, ExecPolicy::Serial);
    State b = step_viscosity_upwind(st, cfg, ExecPolicy::Parallel);
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(a.rho[static_cast<size_t>(i)] - b.rho[static_cast<size_t>(i)]) <=
              1e-15);
        CHECK(a.s[static_cast<size_t>(i)] == b.s[static_cast<size_t>(i)]);
    }
}

TEST_CASE("auto policy stays deterministic across repeated calls") {
    const int n = 50'000;
    WeightedGraph g = build_lattice_1d(n, 1.0 / n, LatticeBoundary::Periodic);
    State st = big_state(n);
    HamiltonianSpec spec;
    spec.beta = 0.3;
    std::vector<double> dr1(n), ds1(n), dr2(n), ds2(n);
    vector_field(g, spec, st, dr1, ds1);
    vector_field(g, spec, st, dr2, ds2);
    for (int i = 0; i < n; ++i) CHECK(dr1[static_cast<size_t>(i)] == dr2[static_cast<size_t>(i)]);
}
