#include "whflow/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace whflow {

BoundInputs make_bound_inputs(const WeightedGraph& g, const HamiltonianSpec& spec,
                              const State& st0) {
    BoundInputs b;
    b.H0 = energy_breakdown(g, spec, st0).total;
    double min_v = 0.0;
    if (!spec.V.empty()) min_v = *std::min_element(spec.V.begin(), spec.V.end());
    double min_w = 0.0;
    if (!spec.W.empty()) {
        min_w = spec.W[0][0];
        for (const auto& row : spec.W)
            min_w = std::min(min_w, *std::min_element(row.begin(), row.end()));
        min_w *= 0.5;
    }
    b.min_potential = min_v + min_w;
    b.M = b.H0 - b.min_potential;
    b.beta = spec.beta;
    b.N = g.n_nodes();
    BoundaryMetrics m = boundary_metrics(g);
    b.kappa = m.kappa;
    b.d_max = m.d_max;
    b.min_rho0 = *std::min_element(st0.rho.begin(), st0.rho.end());
    b.min_omega_tilde = g.min_omega_tilde();
    return b;
}

LowerBound lower_bound_periodic(const BoundInputs& b) {
    if (!(b.beta > 0.0))
        throw std::invalid_argument("lower_bound_periodic is inapplicable for beta <= 0");
    if (b.N < 2) throw std::invalid_argument("lower_bound_periodic needs N >= 2");
    const double m_eff = b.M / b.min_omega_tilde;
    const int half_plus_one = (b.N - 1) / 2 + 1;
    const double expo = m_eff * (b.N - 1) * half_plus_one / b.beta;
    const double formula = 1.0 / (1.0 + b.N * std::exp(expo));
    LowerBound out;
    out.value = std::min(0.5 * b.min_rho0, formula);
    out.hypothesis_holds = b.min_rho0 < 1.0 / b.N;
    return out;
}

LowerBound lower_bound_boundary(const BoundInputs& b) {
    if (b.kappa < 2)
        throw std::invalid_argument(
            "lower_bound_boundary is inapplicable for kappa < 2 (use the periodic bound)");
    if (!(b.beta > 0.0))
        throw std::invalid_argument("lower_bound_boundary is inapplicable for beta <= 0");
    const double m_eff = b.M / b.min_omega_tilde;
    const double expo = 2.0 * m_eff * (b.d_max - 1) * (b.N - 1) / b.beta;
    const double formula = 1.0 / (1.0 + b.kappa * (b.d_max - 1) * std::exp(expo));
    LowerBound out;
    out.value = std::min(0.5 * b.min_rho0, formula);
    out.hypothesis_holds = b.min_rho0 < 1.0 / b.N;
    return out;
}

double step_size_bound(double c, double c0, double C0, double M, double M0,
                       double beta, double safety) {
    if (!(c > 0.0) || !(c < 1.0))
        throw std::invalid_argument("step_size_bound: c must lie in (0,1)");
    if (!(c0 > 0.0) || c0 > C0)
        throw std::invalid_argument("step_size_bound: need 0 < c0 <= C0");
    if (!(safety > 0.0)) throw std::invalid_argument("step_size_bound: safety must be positive");
    const double inf = std::numeric_limits<double>::infinity();
    const double t1 = 1.0 / C0;
    const double t2 = M > 0.0 ? std::sqrt(c * c0 / M) / C0 : inf;
    const double t3 = beta > 0.0 ? c * c / (beta * (1.0 + c + M0 * c * c)) / C0 : inf;
    return safety * std::min({t1, t2, t3});
}

double accurate_sum(std::span<const double> values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

DiagnosticsRecord record_diagnostics(const WeightedGraph& g, const HamiltonianSpec& spec,
                                     const State& st, double H0, int newton_iterations) {
    DiagnosticsRecord rec;
    rec.t = st.t;
    rec.mass = accurate_sum(st.rho);
    EnergyBreakdown eb = energy_breakdown(g, spec, st);
    rec.H = eb.total;
    rec.energy_error = eb.total - H0;
    rec.kinetic = eb.kinetic;
    rec.fisher = eb.fisher;
    rec.potential = eb.potential;
    rec.interaction = eb.interaction;
    rec.min_rho = *std::min_element(st.rho.begin(), st.rho.end());
    rec.newton_iterations = newton_iterations;
    return rec;
}

double symplecticity_defect(const std::function<State(const State&)>& step_map,
                            const State& st, double fd_eps) {
    const int n = static_cast<int>(st.rho.size());
    const int dim = 2 * n;
    auto pack = [n](const State& s) {
        Eigen::VectorXd y(2 * n);
        for (int i = 0; i < n; ++i) {
            y[i] = s.rho[static_cast<size_t>(i)];
            y[n + i] = s.s[static_cast<size_t>(i)];
        }
        return y;
    };
    auto unpack = [&st, n](const Eigen::VectorXd& y) {
        State s = st;
        for (int i = 0; i < n; ++i) {
            s.rho[static_cast<size_t>(i)] = y[i];
            s.s[static_cast<size_t>(i)] = y[n + i];
        }
        return s;
    };
    const Eigen::VectorXd y0 = pack(st);
    Eigen::MatrixXd jac(dim, dim);
    for (int k = 0; k < dim; ++k) {
        Eigen::VectorXd yp = y0, ym = y0;
        yp[k] += fd_eps;
        ym[k] -= fd_eps;
        const Eigen::VectorXd fp = pack(step_map(unpack(yp)));
        const Eigen::VectorXd fm = pack(step_map(unpack(ym)));
        jac.col(k) = (fp - fm) / (2.0 * fd_eps);
    }
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
        omega(i, n + i) = 1.0;
        omega(n + i, i) = -1.0;
    }
    const Eigen::MatrixXd defect = jac.transpose() * omega * jac - omega;
    return defect.cwiseAbs().maxCoeff();
}

double symplecticity_defect(const Stepper& stepper, const WeightedGraph& g,
                            const HamiltonianSpec& spec, const State& st, double tau,
                            double fd_eps) {
    (void)g;
    (void)spec;
    auto map = [&stepper, tau](const State& s) {
        StepResult r = stepper(s, tau);
        if (!r.ok())
            throw std::runtime_error("symplecticity_defect: perturbed step failed");
        return r.state;
    };
    return symplecticity_defect(map, st, fd_eps);
}

State two_node_closed_form(std::array<double, 2> rho0, std::array<double, 2> s0,
                           double t) {
    if (std::abs(rho0[0] + rho0[1] - 1.0) > 1e-12)
        throw std::invalid_argument("two_node_closed_form: rho must sum to 1");
    const double u0 = rho0[0] - rho0[1];
    const double v0 = s0[0] - s0[1];
    const double sum0 = s0[0] + s0[1];
    const double u = u0 * std::cos(t) + v0 * std::sin(t);
    const double v = v0 * std::cos(t) - u0 * std::sin(t);
    const double s2t = std::sin(2.0 * t);
    const double sint = std::sin(t);
    const double int_v2 = v0 * v0 * (0.5 * t + 0.25 * s2t) -
                          u0 * v0 * sint * sint +
                          u0 * u0 * (0.5 * t - 0.25 * s2t);
    const double sum = sum0 - t - 0.5 * int_v2;
    State st;
    st.rho = {0.5 * (1.0 + u), 0.5 * (1.0 - u)};
    st.s = {0.5 * (sum + v), 0.5 * (sum - v)};
    st.t = t;
    return st;
}

State two_node_upwind_blowup(std::array<double, 2> rho0, std::array<double, 2> s0,
                             double t) {
    const double v0 = s0[0] - s0[1];
    if (!(v0 > 0.0))
        throw std::invalid_argument("two_node_upwind_blowup: requires s1 > s2");
    const double t_star = 2.0 / v0;
    if (t >= t_star)
        throw BlowupError("two_node_upwind_blowup: t >= blow-up time t* = " +
                              std::to_string(t_star),
                          t_star);
    const double denom = 1.0 - 0.5 * v0 * t;
    const double v = v0 / denom;
    const double rho2 = rho0[1] * denom * denom;
    State st;
    st.rho = {rho0[0] + rho0[1] - rho2, rho2};
    st.s = {s0[0], s0[0] - v};
    st.t = t;
    return st;
}

std::pair<double, double> consistency_residual(double h, const SmoothField& rho,
                                               const SmoothField& s,
                                               const HamiltonianSpec& spec) {
    const int n = static_cast<int>(std::llround(1.0 / h));
    if (std::abs(n * h - 1.0) > 1e-9)
        throw std::invalid_argument("consistency_residual: 1/h must be an integer");
    if (!spec.V.empty() || !spec.W.empty())
        throw std::invalid_argument("consistency_residual: V and W must be empty");
    WeightedGraph g = build_lattice_1d(n, h, LatticeBoundary::Periodic);
    State st;
    st.rho.resize(static_cast<size_t>(n));
    st.s.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x = i * h;
        st.rho[static_cast<size_t>(i)] = rho.value(x);
        st.s[static_cast<size_t>(i)] = s.value(x);
    }
    std::vector<double> drho(static_cast<size_t>(n)), ds(static_cast<size_t>(n));
    vector_field(g, spec, st, drho, ds);
    double res_rho = 0.0, res_s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = i * h;
        const double r = rho.value(x), r1 = rho.d1(x), r2 = rho.d2(x);
        const double s1 = s.d1(x), s2 = s.d2(x);
        const double rhs_rho = -(r1 * s1 + r * s2);
        const double rhs_s =
            -0.5 * s1 * s1 - spec.beta * ((r1 / r) * (r1 / r) - 2.0 * r2 / r);
        res_rho = std::max(res_rho, std::abs(drho[static_cast<size_t>(i)] - rhs_rho));
        res_s = std::max(res_s, std::abs(ds[static_cast<size_t>(i)] - rhs_s));
    }
    return {res_rho, res_s};
}

}  // namespace whflow
