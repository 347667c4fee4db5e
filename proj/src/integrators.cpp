#include "whflow/integrators.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace whflow {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double linf(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Newton iteration on F(z) = 0 with a sparse analytic Jacobian or a central
// finite-difference fallback.  Entries listed in positive_idx are kept
// strictly positive by halving the update.
struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

template <class ResidualFn, class JacobianFn>
NewtonOutcome newton_solve(Eigen::VectorXd& z, ResidualFn&& residual_fn,
                           JacobianFn&& jacobian_fn,
                           const std::vector<int>& positive_idx,
                           const SolverConfig& cfg) {
    const auto dim = z.size();
    Eigen::VectorXd r(dim), z_try(dim), r_try(dim);
    residual_fn(z, r);
    NewtonOutcome out;
    out.residual = linf(r);
    if (!all_finite(r)) return out;

    Eigen::SparseMatrix<double> jac(dim, dim);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::MatrixXd dense_jac;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (out.residual <= cfg.residual_tol) {
            out.converged = true;
            return out;
        }
        Eigen::VectorXd dz;
        if (cfg.jacobian_mode == JacobianMode::Analytic) {
            jacobian_fn(z, jac);
            lu.compute(jac);
            if (lu.info() != Eigen::Success) return out;
            dz = lu.solve(-r);
        } else {
            // central finite differences of the residual, column by column
            dense_jac.resize(dim, dim);
            Eigen::VectorXd zp = z, rm(dim), rp(dim);
            for (Eigen::Index k = 0; k < dim; ++k) {
                const double h = 1e-7 * std::max(1.0, std::abs(z[k]));
                const double saved = zp[k];
                zp[k] = saved + h;
                residual_fn(zp, rp);
                zp[k] = saved - h;
                residual_fn(zp, rm);
                zp[k] = saved;
                dense_jac.col(k) = (rp - rm) / (2.0 * h);
            }
            dz = dense_jac.partialPivLu().solve(-r);
        }
        if (!all_finite(dz)) return out;

        double lambda = 1.0;
        bool accepted = false;
        while (lambda > 1e-12) {
            z_try = z + lambda * dz;
            bool positive = true;
            for (int k : positive_idx)
                if (!(z_try[k] > 0.0)) {
                    positive = false;
                    break;
                }
            if (positive) {
                residual_fn(z_try, r_try);
                if (all_finite(r_try)) {
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) return out;
        z = z_try;
        r = r_try;
        out.residual = linf(r);
        out.iterations = it + 1;
    }
    out.converged = out.residual <= cfg.residual_tol;
    return out;
}

void add_identity(std::vector<Eigen::Triplet<double>>& trips, int offset, int n) {
    for (int i = 0; i < n; ++i) trips.emplace_back(offset + i, offset + i, 1.0);
}

std::span<const double> orientation(const HamiltonianSpec& spec, const State& st,
                                    const SolverConfig& cfg) {
    if (spec.theta.kind == WeightKind::Upwind &&
        cfg.upwind_freeze == UpwindFreeze::StepStart)
        return std::span<const double>(st.s);
    return {};
}

bool positive_rho(std::span<const double> rho) {
    for (double v : rho)
        if (!(v > 0.0)) return false;
    return true;
}

}  // namespace

// --------------------------------------------------------------------------
// tableaux
// --------------------------------------------------------------------------

Tableau Tableau::symplectic_euler() {
    return Tableau{1, {0.0}, {1.0}, {1.0}, {0.0}};
}

Tableau Tableau::implicit_midpoint() {
    return Tableau{1, {0.5}, {0.5}, {1.0}, {0.5}};
}

Tableau Tableau::gauss2() {
    const double d = kSqrt3 / 6.0;
    std::vector<double> a = {0.25, 0.25 - d, 0.25 + d, 0.25};
    return Tableau{2, a, a, {0.5, 0.5}, {0.5 - d, 0.5 + d}};
}

Tableau Tableau::explicit_euler() {
    return Tableau{1, {0.0}, {0.0}, {1.0}, {0.0}};
}

Tableau Tableau::by_name(std::string_view name) {
    if (name == "symplectic_euler") return symplectic_euler();
    if (name == "midpoint") return implicit_midpoint();
    if (name == "gauss2") return gauss2();
    if (name == "explicit_euler") return explicit_euler();
    throw std::invalid_argument("unknown tableau: " + std::string(name));
}

bool check_tableau_symplectic(const Tableau& t, double tol) {
    double worst = 0.0;
    for (int i = 0; i < t.stages; ++i)
        for (int j = 0; j < t.stages; ++j) {
            const double defect = t.At(i, j) * t.b[static_cast<size_t>(i)] +
                                  t.A(j, i) * t.b[static_cast<size_t>(j)] -
                                  t.b[static_cast<size_t>(i)] * t.b[static_cast<size_t>(j)];
            worst = std::max(worst, std::abs(defect));
        }
    return worst <= tol;
}

// --------------------------------------------------------------------------
// symplectic Euler: S^{n+1} = S^n - tau * dH/drho(S^{n+1}, rho^n),
//                   rho^{n+1} = rho^n + tau * dH/dS(S^{n+1}, rho^n)
// --------------------------------------------------------------------------

StepResult step_symplectic_euler(const WeightedGraph& g, const HamiltonianSpec& spec,
                                 const State& st, double tau, const SolverConfig& cfg) {
    const int n = g.n_nodes();
    StepResult result;
    result.state = st;
    auto s_orient = orientation(spec, st, cfg);

    std::vector<double> work(static_cast<size_t>(n));
    auto residual = [&](const Eigen::VectorXd& z, Eigen::VectorXd& r) {
        std::span<const double> s_new(z.data(), static_cast<size_t>(n));
        grad_rho(g, spec, st.rho, s_new, work, s_orient, ExecPolicy::Serial);
        for (int i = 0; i < n; ++i)
            r[i] = z[i] - st.s[static_cast<size_t>(i)] + tau * work[static_cast<size_t>(i)];
    };
    std::vector<Triplet> h_ss, h_s_rho, h_rho_rho;
    auto jacobian = [&](const Eigen::VectorXd& z, Eigen::SparseMatrix<double>& jac) {
        std::span<const double> s_new(z.data(), static_cast<size_t>(n));
        hessian_blocks(g, spec, st.rho, s_new, s_orient, h_ss, h_s_rho, h_rho_rho);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(h_s_rho.size() + static_cast<size_t>(n));
        add_identity(trips, 0, n);
        // dR_i/dS_k = delta_ik + tau * d^2H/(drho_i dS_k); h_s_rho holds
        // d^2H/(dS_r drho_c), so transpose while scattering.
        for (const Triplet& t : h_s_rho) trips.emplace_back(t.c, t.r, tau * t.v);
        jac.setFromTriplets(trips.begin(), trips.end());
    };

    // explicit Euler predictor
    Eigen::VectorXd z(n);
    grad_rho(g, spec, st.rho, st.s, work, s_orient, ExecPolicy::Serial);
    for (int i = 0; i < n; ++i)
        z[i] = st.s[static_cast<size_t>(i)] - tau * work[static_cast<size_t>(i)];

    NewtonOutcome nt = newton_solve(z, residual, jacobian, {}, cfg);
    result.report.newton_iterations = nt.iterations;
    result.report.final_residual = nt.residual;
    result.report.converged = nt.converged;
    if (!nt.converged) {
        result.report.status = StepStatus::NewtonFailure;
        return result;
    }

    State next;
    next.s.assign(z.data(), z.data() + n);
    next.rho.resize(static_cast<size_t>(n));
    grad_s(g, spec, st.rho, next.s, next.rho, s_orient, ExecPolicy::Serial);
    for (int i = 0; i < n; ++i)
        next.rho[static_cast<size_t>(i)] =
            st.rho[static_cast<size_t>(i)] + tau * next.rho[static_cast<size_t>(i)];
    next.t = st.t + tau;
    if (!positive_rho(next.rho)) {
        result.report.status = StepStatus::PositivityFailure;
        return result;
    }
    result.state = std::move(next);
    return result;
}

// --------------------------------------------------------------------------
// implicit midpoint on the stage values (Phi, Xi) = midpoint state
// --------------------------------------------------------------------------

StepResult step_implicit_midpoint(const WeightedGraph& g, const HamiltonianSpec& spec,
                                  const State& st, double tau, const SolverConfig& cfg) {
    const int n = g.n_nodes();
    StepResult result;
    result.state = st;
    auto s_orient = orientation(spec, st, cfg);

    std::vector<double> hs(static_cast<size_t>(n)), hr(static_cast<size_t>(n));
    auto residual = [&](const Eigen::VectorXd& z, Eigen::VectorXd& r) {
        std::span<const double> phi(z.data(), static_cast<size_t>(n));
        std::span<const double> xi(z.data() + n, static_cast<size_t>(n));
        grad_s(g, spec, phi, xi, hs, s_orient, ExecPolicy::Serial);
        grad_rho(g, spec, phi, xi, hr, s_orient, ExecPolicy::Serial);
        const double half = 0.5 * tau;
        for (int i = 0; i < n; ++i) {
            r[i] = z[i] - st.rho[static_cast<size_t>(i)] - half * hs[static_cast<size_t>(i)];
            r[n + i] =
                z[n + i] - st.s[static_cast<size_t>(i)] + half * hr[static_cast<size_t>(i)];
        }
    };
    std::vector<Triplet> h_ss, h_s_rho, h_rho_rho;
    auto jacobian = [&](const Eigen::VectorXd& z, Eigen::SparseMatrix<double>& jac) {
        std::span<const double> phi(z.data(), static_cast<size_t>(n));
        std::span<const double> xi(z.data() + n, static_cast<size_t>(n));
        hessian_blocks(g, spec, phi, xi, s_orient, h_ss, h_s_rho, h_rho_rho);
        const double half = 0.5 * tau;
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(2 * static_cast<size_t>(n) + h_ss.size() + 2 * h_s_rho.size() +
                      h_rho_rho.size());
        add_identity(trips, 0, 2 * n);
        for (const Triplet& t : h_s_rho) {
            trips.emplace_back(t.r, t.c, -half * t.v);          // dRphi/dPhi
            trips.emplace_back(n + t.c, n + t.r, half * t.v);   // dRxi/dXi
        }
        for (const Triplet& t : h_ss) trips.emplace_back(t.r, n + t.c, -half * t.v);
        for (const Triplet& t : h_rho_rho) trips.emplace_back(n + t.r, t.c, half * t.v);
        jac.setFromTriplets(trips.begin(), trips.end());
    };

    Eigen::VectorXd z(2 * n);
    {
        std::vector<double> drho(static_cast<size_t>(n)), ds(static_cast<size_t>(n));
        vector_field(g, spec, st, drho, ds, s_orient, ExecPolicy::Serial);
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            z[i] = st.rho[static_cast<size_t>(i)] + 0.5 * tau * drho[static_cast<size_t>(i)];
            z[n + i] = st.s[static_cast<size_t>(i)] + 0.5 * tau * ds[static_cast<size_t>(i)];
            if (!(z[i] > 0.0)) ok = false;
        }
        if (!ok)
            for (int i = 0; i < n; ++i) z[i] = st.rho[static_cast<size_t>(i)];
    }
    std::vector<int> positive(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) positive[static_cast<size_t>(i)] = i;

    NewtonOutcome nt = newton_solve(z, residual, jacobian, positive, cfg);
    result.report.newton_iterations = nt.iterations;
    result.report.final_residual = nt.residual;
    result.report.converged = nt.converged;
    if (!nt.converged) {
        result.report.status = StepStatus::NewtonFailure;
        return result;
    }

    std::span<const double> phi(z.data(), static_cast<size_t>(n));
    std::span<const double> xi(z.data() + n, static_cast<size_t>(n));
    grad_s(g, spec, phi, xi, hs, s_orient, ExecPolicy::Serial);
    grad_rho(g, spec, phi, xi, hr, s_orient, ExecPolicy::Serial);
    State next;
    next.rho.resize(static_cast<size_t>(n));
    next.s.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        next.rho[static_cast<size_t>(i)] =
            st.rho[static_cast<size_t>(i)] + tau * hs[static_cast<size_t>(i)];
        next.s[static_cast<size_t>(i)] =
            st.s[static_cast<size_t>(i)] - tau * hr[static_cast<size_t>(i)];
    }
    next.t = st.t + tau;
    if (!positive_rho(next.rho)) {
        result.report.status = StepStatus::PositivityFailure;
        return result;
    }
    result.state = std::move(next);
    return result;
}

// --------------------------------------------------------------------------
// general partitioned Runge-Kutta with stacked stage unknowns
// --------------------------------------------------------------------------

StepResult step_prk(const WeightedGraph& g, const HamiltonianSpec& spec,
                    const Tableau& tableau, const State& st, double tau,
                    const SolverConfig& cfg) {
    const int n = g.n_nodes();
    const int s = tableau.stages;
    if (s < 1 || tableau.a.size() != static_cast<size_t>(s * s) ||
        tableau.a_tilde.size() != static_cast<size_t>(s * s) ||
        tableau.b.size() != static_cast<size_t>(s))
        throw std::invalid_argument("tableau dimensions are inconsistent");
    if (!cfg.allow_nonsymplectic && !check_tableau_symplectic(tableau, 1e-12))
        throw std::invalid_argument(
            "tableau is not symplectic (set allow_nonsymplectic to override)");

    StepResult result;
    result.state = st;
    auto s_orient = orientation(spec, st, cfg);
    const auto phi_of = [n](int stage) { return stage * n; };
    const auto xi_of = [n, s](int stage) { return s * n + stage * n; };

    std::vector<std::vector<double>> hs(static_cast<size_t>(s),
                                        std::vector<double>(static_cast<size_t>(n)));
    std::vector<std::vector<double>> hr = hs;
    auto stage_grads = [&](const Eigen::VectorXd& z) {
        for (int i = 0; i < s; ++i) {
            std::span<const double> phi(z.data() + phi_of(i), static_cast<size_t>(n));
            std::span<const double> xi(z.data() + xi_of(i), static_cast<size_t>(n));
            grad_s(g, spec, phi, xi, hs[static_cast<size_t>(i)], s_orient,
                   ExecPolicy::Serial);
            grad_rho(g, spec, phi, xi, hr[static_cast<size_t>(i)], s_orient,
                     ExecPolicy::Serial);
        }
    };
    auto residual = [&](const Eigen::VectorXd& z, Eigen::VectorXd& r) {
        stage_grads(z);
        for (int i = 0; i < s; ++i)
            for (int k = 0; k < n; ++k) {
                double acc_rho = 0.0, acc_s = 0.0;
                for (int j = 0; j < s; ++j) {
                    acc_rho += tableau.A(i, j) * hs[static_cast<size_t>(j)][static_cast<size_t>(k)];
                    acc_s += tableau.At(i, j) * hr[static_cast<size_t>(j)][static_cast<size_t>(k)];
                }
                r[phi_of(i) + k] =
                    z[phi_of(i) + k] - st.rho[static_cast<size_t>(k)] - tau * acc_rho;
                r[xi_of(i) + k] =
                    z[xi_of(i) + k] - st.s[static_cast<size_t>(k)] + tau * acc_s;
            }
    };
    std::vector<Triplet> h_ss, h_s_rho, h_rho_rho;
    auto jacobian = [&](const Eigen::VectorXd& z, Eigen::SparseMatrix<double>& jac) {
        std::vector<Eigen::Triplet<double>> trips;
        add_identity(trips, 0, 2 * s * n);
        for (int j = 0; j < s; ++j) {
            std::span<const double> phi(z.data() + phi_of(j), static_cast<size_t>(n));
            std::span<const double> xi(z.data() + xi_of(j), static_cast<size_t>(n));
            hessian_blocks(g, spec, phi, xi, s_orient, h_ss, h_s_rho, h_rho_rho);
            for (int i = 0; i < s; ++i) {
                const double aij = tau * tableau.A(i, j);
                const double atij = tau * tableau.At(i, j);
                if (aij != 0.0) {
                    for (const Triplet& t : h_s_rho)
                        trips.emplace_back(phi_of(i) + t.r, phi_of(j) + t.c, -aij * t.v);
                    for (const Triplet& t : h_ss)
                        trips.emplace_back(phi_of(i) + t.r, xi_of(j) + t.c, -aij * t.v);
                }
                if (atij != 0.0) {
                    for (const Triplet& t : h_rho_rho)
                        trips.emplace_back(xi_of(i) + t.r, phi_of(j) + t.c, atij * t.v);
                    for (const Triplet& t : h_s_rho)
                        trips.emplace_back(xi_of(i) + t.c, xi_of(j) + t.r, atij * t.v);
                }
            }
        }
        jac.setFromTriplets(trips.begin(), trips.end());
    };

    Eigen::VectorXd z(2 * s * n);
    {
        std::vector<double> drho(static_cast<size_t>(n)), ds(static_cast<size_t>(n));
        vector_field(g, spec, st, drho, ds, s_orient, ExecPolicy::Serial);
        for (int i = 0; i < s; ++i) {
            double ca = 0.0, cat = 0.0;
            for (int j = 0; j < s; ++j) {
                ca += tableau.A(i, j);
                cat += tableau.At(i, j);
            }
            bool ok = true;
            for (int k = 0; k < n; ++k) {
                z[phi_of(i) + k] = st.rho[static_cast<size_t>(k)] +
                                   tau * ca * drho[static_cast<size_t>(k)];
                z[xi_of(i) + k] =
                    st.s[static_cast<size_t>(k)] + tau * cat * ds[static_cast<size_t>(k)];
                if (!(z[phi_of(i) + k] > 0.0)) ok = false;
            }
            if (!ok)
                for (int k = 0; k < n; ++k)
                    z[phi_of(i) + k] = st.rho[static_cast<size_t>(k)];
        }
    }
    std::vector<int> positive;
    positive.reserve(static_cast<size_t>(s * n));
    for (int i = 0; i < s; ++i)
        for (int k = 0; k < n; ++k) positive.push_back(phi_of(i) + k);

    NewtonOutcome nt = newton_solve(z, residual, jacobian, positive, cfg);
    result.report.newton_iterations = nt.iterations;
    result.report.final_residual = nt.residual;
    result.report.converged = nt.converged;
    if (!nt.converged) {
        result.report.status = StepStatus::NewtonFailure;
        return result;
    }

    stage_grads(z);
    State next;
    next.rho.resize(static_cast<size_t>(n));
    next.s.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        double acc_rho = 0.0, acc_s = 0.0;
        for (int i = 0; i < s; ++i) {
            acc_rho += tableau.b[static_cast<size_t>(i)] *
                       hs[static_cast<size_t>(i)][static_cast<size_t>(k)];
            acc_s += tableau.b[static_cast<size_t>(i)] *
                     hr[static_cast<size_t>(i)][static_cast<size_t>(k)];
        }
        next.rho[static_cast<size_t>(k)] = st.rho[static_cast<size_t>(k)] + tau * acc_rho;
        next.s[static_cast<size_t>(k)] = st.s[static_cast<size_t>(k)] - tau * acc_s;
    }
    next.t = st.t + tau;
    if (!positive_rho(next.rho)) {
        result.report.status = StepStatus::PositivityFailure;
        return result;
    }
    result.state = std::move(next);
    return result;
}

Stepper make_stepper(const WeightedGraph& g, const HamiltonianSpec& spec,
                     std::string_view token, const SolverConfig& cfg) {
    if (token == "symplectic_euler")
        return [&g, &spec, cfg](const State& st, double tau) {
            return step_symplectic_euler(g, spec, st, tau, cfg);
        };
    if (token == "midpoint")
        return [&g, &spec, cfg](const State& st, double tau) {
            return step_implicit_midpoint(g, spec, st, tau, cfg);
        };
    if (token.rfind("prk:", 0) == 0) {
        Tableau t = Tableau::by_name(token.substr(4));
        return [&g, &spec, cfg, t](const State& st, double tau) {
            return step_prk(g, spec, t, st, tau, cfg);
        };
    }
    throw std::invalid_argument("unknown stepper token: " + std::string(token));
}

Trajectory integrate(const WeightedGraph& g, const HamiltonianSpec& spec,
                     const Stepper& stepper, const State& st0, double tau, int n_steps,
                     const std::vector<Observer>& observers,
                     const IntegrateOptions& options) {
    if (auto violation = validate_state(g, st0))
        throw std::invalid_argument("integrate: invalid initial state: " + *violation);
    validate_spec(g, spec);
    if (n_steps < 0) throw std::invalid_argument("integrate: negative step count");

    Trajectory tr;
    tr.states.push_back(st0);
    State cur = st0;
    const int every = std::max(1, options.record_every);
    for (int k = 1; k <= n_steps; ++k) {
        StepResult res = stepper(cur, tau);
        tr.last_report = res.report;
        if (!res.ok()) {
            tr.failure = res.report.status;
            tr.completed = false;
            if (tr.states.empty() || tr.states.back().t != cur.t) tr.states.push_back(cur);
            return tr;
        }
        cur = std::move(res.state);
        cur.t = st0.t + k * tau;
        tr.steps_completed = k;
        for (const Observer& obs : observers) obs(k, cur, res.report);
        if (k % every == 0 || k == n_steps) tr.states.push_back(cur);
    }
    tr.completed = true;
    return tr;
}

}  // namespace whflow
