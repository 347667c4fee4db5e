#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "whflow/analysis.hpp"

using namespace whflow;
using whflow::test::random_state;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("periodic lower bound") {
    SUBCASE("worked value at N = 4, M/beta = 1") {
        BoundInputs b;
        b.M = 1.0;
        b.beta = 1.0;
        b.N = 4;
        b.min_rho0 = 0.1;
        // floor((N-1)/2) + 1 = 2, exponent M(N-1)*2/beta = 6
        const double expected = 1.0 / (1.0 + 4.0 * std::exp(6.0));
        LowerBound lb = lower_bound_periodic(b);
        CHECK(lb.value == doctest::Approx(expected).epsilon(1e-14));
        CHECK(lb.value == doctest::Approx(6.19304e-4).epsilon(1e-4));
        CHECK(lb.hypothesis_holds);
    }
    SUBCASE("M = 0 reduces to min(min_rho0/2, 1/(1+N))") {
        BoundInputs b;
        b.M = 0.0;
        b.beta = 0.5;
        b.N = 6;
        b.min_rho0 = 0.8 / 6;
        LowerBound lb = lower_bound_periodic(b);
        CHECK(lb.value == doctest::Approx(std::min(0.4 / 6, 1.0 / 7.0)).epsilon(1e-14));
    }
    SUBCASE("monotone decreasing in M/beta, capped by half the initial minimum") {
        std::mt19937 rng(31);
        std::uniform_real_distribution<double> um(0.0, 3.0);
        for (int k = 0; k < 200; ++k) {
            BoundInputs b;
            b.beta = 1.0;
            b.N = 5 + (k % 7);
            b.min_rho0 = 0.5 / b.N;
            double m1 = um(rng), m2 = um(rng);
            if (m1 > m2) std::swap(m1, m2);
            b.M = m1;
            const double v1 = lower_bound_periodic(b).value;
            b.M = m2;
            const double v2 = lower_bound_periodic(b).value;
            CHECK(v1 >= v2);
            CHECK(v1 <= 0.5 * b.min_rho0 + 1e-18);
        }
    }
    SUBCASE("omega-tilde rescaling enters as M / min omega") {
        BoundInputs b;
        b.M = 1.0;
        b.beta = 1.0;
        b.N = 4;
        b.min_rho0 = 0.1;
        b.min_omega_tilde = 2.0;
        CHECK(lower_bound_periodic(b).value ==
              doctest::Approx(1.0 / (1.0 + 4.0 * std::exp(3.0))).epsilon(1e-14));
    }
    SUBCASE("beta = 0 is inapplicable") {
        BoundInputs b;
        b.N = 4;
        b.min_rho0 = 0.1;
        CHECK_THROWS_AS(lower_bound_periodic(b), std::invalid_argument);
    }
}

TEST_CASE("boundary lower bound") {
    SUBCASE("path N = 3, M/beta = 1") {
        BoundInputs b;
        b.M = 1.0;
        b.beta = 1.0;
        b.N = 3;
        b.kappa = 2;
        b.d_max = 2;
        b.min_rho0 = 0.2;
        // exponent 2*M*(d_max-1)*(N-1)/beta = 4; the N = 3 case worked in the
        // proof is 1/(1+2 exp(4M/beta)), and the general formula reduces to it
        const double expected = std::min(0.1, 1.0 / (1.0 + 2.0 * std::exp(4.0)));
        LowerBound lb = lower_bound_boundary(b);
        CHECK(lb.value == doctest::Approx(expected).epsilon(1e-14));
        CHECK(lb.value == doctest::Approx(9.0747e-3).epsilon(1e-4));
    }
    SUBCASE("M = 0") {
        BoundInputs b;
        b.beta = 1.0;
        b.N = 5;
        b.kappa = 3;
        b.d_max = 3;
        b.min_rho0 = 0.05;
        CHECK(lower_bound_boundary(b).value ==
              doctest::Approx(std::min(0.025, 1.0 / 7.0)).epsilon(1e-14));
    }
    SUBCASE("kappa < 2 routes to the periodic variant") {
        BoundInputs b;
        b.beta = 1.0;
        b.N = 5;
        b.kappa = 0;
        b.d_max = 2;
        b.min_rho0 = 0.1;
        CHECK_THROWS_AS(lower_bound_boundary(b), std::invalid_argument);
    }
}

TEST_CASE("step size bound") {
    CHECK(step_size_bound(1.0 - 1e-12, 1.0, 1.0, 1.0, 0.0, 1.0) ==
          doctest::Approx(0.5).epsilon(1e-9));
    SUBCASE("M -> 0 drops the square-root term") {
        const double v = step_size_bound(0.5, 1.0, 2.0, 0.0, 1.0, 1.0);
        CHECK(v == doctest::Approx(std::min(0.5, 0.5 * 0.25 / (1.0 + 0.5 + 0.25))));
    }
    SUBCASE("beta-dominant regime scales as c^2") {
        const double beta = 50.0;
        const double v1 = step_size_bound(0.2, 1.0, 1.0, 1e-9, 0.0, beta);
        const double v2 = step_size_bound(0.1, 1.0, 1.0, 1e-9, 0.0, beta);
        CHECK(v1 / v2 == doctest::Approx(4.0).epsilon(0.1));
    }
    SUBCASE("safety multiplies") {
        CHECK(step_size_bound(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.25) ==
              doctest::Approx(0.25 * step_size_bound(0.5, 1.0, 1.0, 1.0, 1.0, 1.0)));
    }
    CHECK_THROWS_AS(step_size_bound(1.5, 1.0, 1.0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("diagnostics record") {
    WeightedGraph g = build_lattice_1d(5, 0.2, LatticeBoundary::Periodic);
    HamiltonianSpec spec;
    spec.beta = 1.0;
    State st{std::vector<double>(5, 0.2), std::vector<double>(5, 0.0), 0.0};
    const double H0 = energy_breakdown(g, spec, st).total;
    DiagnosticsRecord rec = record_diagnostics(g, spec, st, H0, 3);
    CHECK(rec.energy_error == 0.0);
    CHECK(rec.mass == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rec.min_rho == doctest::Approx(0.2));
    CHECK(rec.newton_iterations == 3);
}

TEST_CASE("bound inputs from a problem") {
    WeightedGraph g = build_lattice_1d(8, 0.125, LatticeBoundary::Periodic);
    HamiltonianSpec spec;
    spec.beta = 0.5;
    State st{std::vector<double>(8, 0.125), std::vector<double>(8, 0.0), 0.0};
    BoundInputs b = make_bound_inputs(g, spec, st);
    CHECK(b.N == 8);
    CHECK(b.kappa == 0);
    CHECK(b.d_max == 4);
    CHECK(b.M == doctest::Approx(b.H0));
    CHECK(b.min_omega_tilde == doctest::Approx(64.0));
}

TEST_CASE("symplecticity defect") {
    SUBCASE("an exact rotation has defect at rounding level") {
        const double c = std::cos(0.3), s = std::sin(0.3);
        auto rotation = [c, s](const State& st) {
            State out = st;
            out.rho[0] = c * st.rho[0] + s * st.s[0];
            out.s[0] = -s * st.rho[0] + c * st.s[0];
            return out;
        };
        State st{{1.0}, {0.5}, 0.0};
        // the map is linear, so a large step has no truncation error
        CHECK(symplecticity_defect(rotation, st, 1e-2) <= 1e-12);
    }

    WeightedGraph g = build_lattice_1d(8, 1.0, LatticeBoundary::Periodic);
    HamiltonianSpec spec;
    spec.beta = 1.0;
    std::mt19937 rng(33);
    State st = random_state(8, rng, 0.4, 1.0, 0.5);
    SolverConfig cfg;
    cfg.residual_tol = 1e-14;

    SUBCASE("midpoint step is symplectic to finite-difference accuracy") {
        Stepper step = make_stepper(g, spec, "midpoint", cfg);
        CHECK(symplecticity_defect(step, g, spec, st, 1e-3, 1e-5) <= 1e-6);
    }
    SUBCASE("explicit Euler defect matches its closed-form Jacobian") {
        // two-node system of the closed-form example; J = I + tau A exactly
        WeightedGraph g2 = build_lattice_1d(2, 1.0, LatticeBoundary::Path);
        HamiltonianSpec spec2;
        spec2.theta = WeightRule{WeightKind::Average};
        spec2.W = {{1.0, 0.0}, {0.0, 1.0}};
        SolverConfig euler_cfg;
        euler_cfg.allow_nonsymplectic = true;
        State st2{{0.65, 0.35}, {0.5, -0.1}, 0.0};

        auto defect_fd = [&](double tau) {
            auto map = [&](const State& q) {
                return step_prk(g2, spec2, Tableau::explicit_euler(), q, tau, euler_cfg)
                    .state;
            };
            return symplecticity_defect(map, st2, 1e-6);
        };
        auto defect_exact = [&](double tau) {
            const double v = st2.s[0] - st2.s[1];
            const double th = 0.5 * (st2.rho[0] + st2.rho[1]);
            // A = d(drho/dt, dS/dt)/d(rho, S) of the two-node vector field
            double A[4][4] = {{v / 2, v / 2, th, -th},
                              {-v / 2, -v / 2, -th, th},
                              {-1, 0, -v / 2, v / 2},
                              {0, -1, -v / 2, v / 2}};
            double J[4][4];
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) J[i][j] = (i == j ? 1.0 : 0.0) + tau * A[i][j];
            double Om[4][4] = {{0, 0, 1, 0}, {0, 0, 0, 1}, {-1, 0, 0, 0}, {0, -1, 0, 0}};
            double OJ[4][4] = {}, D[4][4] = {};
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    for (int k = 0; k < 4; ++k) OJ[i][j] += Om[i][k] * J[k][j];
            double worst = 0.0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    for (int k = 0; k < 4; ++k) D[i][j] += J[k][i] * OJ[k][j];
                    D[i][j] -= Om[i][j];
                    worst = std::max(worst, std::abs(D[i][j]));
                }
            return worst;
        };
        // one-step defect of explicit Euler is Theta(tau^2): the tau term
        // cancels identically for Hamiltonian fields
        const double d1 = defect_fd(1e-3), d2 = defect_fd(5e-4);
        CHECK(d1 == doctest::Approx(defect_exact(1e-3)).epsilon(1e-4));
        CHECK(d2 == doctest::Approx(defect_exact(5e-4)).epsilon(1e-4));
        CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.05));
        CHECK(d1 > 0.0);
    }
}

TEST_CASE("two-node closed form") {
    SUBCASE("worked values") {
        State a = two_node_closed_form({0.7, 0.3}, {0.0, 0.0}, kPi);
        CHECK(a.rho[0] == doctest::Approx(0.3).epsilon(1e-14));
        State b = two_node_closed_form({0.5, 0.5}, {1.1, 1.1}, 2.4);
        CHECK(b.rho[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(b.rho[1] == doctest::Approx(0.5).epsilon(1e-14));
        // |S1(0)-S2(0)| > 1 drives a density negative at t = pi/2
        State c = two_node_closed_form({0.5, 0.5}, {1.2, 0.0}, kPi / 2);
        CHECK(c.rho[1] == doctest::Approx(-0.1).epsilon(1e-12));
    }
    SUBCASE("satisfies the graph vector field at random times") {
        WeightedGraph g = build_lattice_1d(2, 1.0, LatticeBoundary::Path);
        HamiltonianSpec spec;
        spec.theta = WeightRule{WeightKind::Average};
        spec.W = {{1.0, 0.0}, {0.0, 1.0}};
        const std::array<double, 2> rho0{0.6, 0.4}, s0{0.3, -0.2};
        std::mt19937 rng(34);
        std::uniform_real_distribution<double> ut(0.0, 2 * kPi);
        for (int k = 0; k < 100; ++k) {
            const double t = ut(rng);
            State st = two_node_closed_form(rho0, s0, t);
            REQUIRE(st.rho[0] > 0.0);
            REQUIRE(st.rho[1] > 0.0);
            std::vector<double> drho(2), ds(2);
            vector_field(g, spec, st, drho, ds);
            const double u0 = rho0[0] - rho0[1], v0 = s0[0] - s0[1];
            const double v = v0 * std::cos(t) - u0 * std::sin(t);
            CHECK(std::abs(drho[0] - 0.5 * v) <= 1e-10);
            CHECK(std::abs(drho[1] + 0.5 * v) <= 1e-10);
            CHECK(std::abs(ds[0] - (-0.25 * v * v - st.rho[0])) <= 1e-10);
            CHECK(std::abs(ds[1] - (-0.25 * v * v - st.rho[1])) <= 1e-10);
        }
    }
    SUBCASE("mass precondition") {
        CHECK_THROWS_AS(two_node_closed_form({0.7, 0.7}, {0, 0}, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("two-node upwind blow-up") {
    SUBCASE("t = 0 returns the inputs") {
        State st = two_node_upwind_blowup({0.5, 0.5}, {2.0, 0.0}, 0.0);
        CHECK(st.rho[0] == doctest::Approx(0.5));
        CHECK(st.rho[1] == doctest::Approx(0.5));
        CHECK(st.s[0] == doctest::Approx(2.0));
        CHECK(st.s[1] == doctest::Approx(0.0));
    }
    SUBCASE("potential difference grows as 2/(1-t) for S0 = (2,0)") {
        State st = two_node_upwind_blowup({0.5, 0.5}, {2.0, 0.0}, 0.9);
        CHECK(st.s[0] - st.s[1] == doctest::Approx(20.0).epsilon(1e-13));
        CHECK(st.rho[1] == doctest::Approx(0.5 * 0.01).epsilon(1e-12));
    }
    SUBCASE("beyond t* raises a blow-up error carrying t*") {
        try {
            two_node_upwind_blowup({0.5, 0.5}, {2.0, 0.0}, 1.0);
            FAIL("expected BlowupError");
        } catch (const BlowupError& e) {
            CHECK(e.t_star == doctest::Approx(1.0));
        }
    }
    CHECK_THROWS_AS(two_node_upwind_blowup({0.5, 0.5}, {0.0, 1.0}, 0.5),
                    std::invalid_argument);
}

TEST_CASE("consistency residual") {
    SmoothField rho{[](double) { return 1.0; }, [](double) { return 0.0; },
                    [](double) { return 0.0; }};
    SmoothField s = rho;
    SUBCASE("constant fields have zero residual") {
        HamiltonianSpec spec;
        spec.beta = 0.5;
        auto [rr, rs] = consistency_residual(1.0 / 32, rho, s, spec);
        CHECK(rr == doctest::Approx(0.0));
        CHECK(rs == doctest::Approx(0.0));
    }
    SUBCASE("orders for the three weight rules") {
        SmoothField rho_f{
            [](double x) { return 1.0 + 0.2 * std::sin(2 * kPi * x); },
            [](double x) { return 0.4 * kPi * std::cos(2 * kPi * x); },
            [](double x) { return -0.8 * kPi * kPi * std::sin(2 * kPi * x); }};
        SmoothField s_f{[](double x) { return std::cos(2 * kPi * x); },
                        [](double x) { return -2 * kPi * std::sin(2 * kPi * x); },
                        [](double x) { return -4 * kPi * kPi * std::cos(2 * kPi * x); }};
        auto order_for = [&](WeightKind kind) {
            HamiltonianSpec spec;
            spec.beta = 0.1;
            spec.theta = WeightRule{kind};
            spec.theta_tilde = WeightRule{WeightKind::LogMean};
            auto [r1, s1] = consistency_residual(1.0 / 64, rho_f, s_f, spec);
            auto [r2, s2] = consistency_residual(1.0 / 128, rho_f, s_f, spec);
            return std::log2(std::max(r1, s1) / std::max(r2, s2));
        };
        CHECK(order_for(WeightKind::Average) == doctest::Approx(2.0).epsilon(0.125));
        CHECK(order_for(WeightKind::LogMean) == doctest::Approx(2.0).epsilon(0.125));
        CHECK(order_for(WeightKind::Upwind) == doctest::Approx(1.0).epsilon(0.25));
    }
}
