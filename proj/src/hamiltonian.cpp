#include "whflow/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace whflow {

namespace {

constexpr int kParallelThreshold = 16384;

bool run_parallel(ExecPolicy policy, int n) {
#ifdef _OPENMP
    if (policy == ExecPolicy::Parallel) return true;
    return policy == ExecPolicy::Auto && n >= kParallelThreshold;
#else
    (void)policy;
    (void)n;
    return false;
#endif
}

double phi(double t) { return 1.0 - t - std::log(t); }

void check_sizes(const WeightedGraph& g, std::span<const double> rho,
                 std::span<const double> s) {
    if (rho.size() != static_cast<size_t>(g.n_nodes()) ||
        s.size() != static_cast<size_t>(g.n_nodes()))
        throw std::invalid_argument("state dimension does not match graph");
}

// exceptions must not escape an OpenMP region; reject bad densities up front
void check_positive(std::span<const double> rho) {
    for (double v : rho)
        if (!(v > 0.0)) throw std::domain_error("nonpositive density entry");
}

}  // namespace

void validate_spec(const WeightedGraph& g, const HamiltonianSpec& spec) {
    const size_t n = static_cast<size_t>(g.n_nodes());
    if (spec.beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    if (!spec.V.empty() && spec.V.size() != n)
        throw std::invalid_argument("V size does not match graph");
    if (!spec.W.empty()) {
        if (spec.W.size() != n)
            throw std::invalid_argument("W size does not match graph");
        for (size_t i = 0; i < n; ++i) {
            if (spec.W[i].size() != n)
                throw std::invalid_argument("W is not square");
            for (size_t j = i + 1; j < n; ++j)
                if (spec.W[i][j] != spec.W[j][i])
                    throw std::invalid_argument("W is not symmetric");
        }
    }
    if (spec.theta_tilde.kind == WeightKind::Upwind)
        throw std::invalid_argument(
            "theta_tilde must be a density-only rule (average or logmean)");
}

std::optional<std::string> validate_state(const WeightedGraph& g, const State& st,
                                          double mass_tol) {
    const size_t n = static_cast<size_t>(g.n_nodes());
    if (st.rho.size() != n || st.s.size() != n)
        return "state dimension does not match graph";
    double mass = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!(st.rho[i] > 0.0))
            return "rho[" + std::to_string(i) + "] is not strictly positive";
        mass += st.rho[i];
    }
    if (std::abs(mass - 1.0) > mass_tol)
        return "mass deviates from 1 by " + std::to_string(mass - 1.0);
    return std::nullopt;
}

EnergyBreakdown energy_breakdown(const WeightedGraph& g, const HamiltonianSpec& spec,
                                 const State& st, std::span<const double> s_orient,
                                 ExecPolicy policy) {
    check_sizes(g, st.rho, st.s);
    check_positive(st.rho);
    std::span<const double> os = s_orient.empty() ? std::span<const double>(st.s)
                                                  : s_orient;
    const auto& edges = g.edges();
    const int ne = static_cast<int>(edges.size());
    const int n = g.n_nodes();

    EnergyBreakdown out;
    double kin = 0.0, fis = 0.0;
    // kinetic and Fisher sums once per undirected edge (weight 1/2 per edge)
    const bool par = run_parallel(policy, ne);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : kin, fis) if (par)
#endif
    for (int e = 0; e < ne; ++e) {
        const Edge& ed = edges[static_cast<size_t>(e)];
        const double ds = st.s[static_cast<size_t>(ed.i)] - st.s[static_cast<size_t>(ed.j)];
        const double th = theta_value(spec.theta, st.rho[static_cast<size_t>(ed.i)],
                                      st.rho[static_cast<size_t>(ed.j)],
                                      os[static_cast<size_t>(ed.i)],
                                      os[static_cast<size_t>(ed.j)]);
        kin += 0.5 * ed.omega * ds * ds * th;
        const double dl = std::log(st.rho[static_cast<size_t>(ed.i)]) -
                          std::log(st.rho[static_cast<size_t>(ed.j)]);
        const double tht = theta_value(spec.theta_tilde, st.rho[static_cast<size_t>(ed.i)],
                                       st.rho[static_cast<size_t>(ed.j)], 0.0, 0.0);
        fis += ed.omega_tilde * dl * dl * tht;
    }
    (void)par;
    out.kinetic = kin;
    out.fisher = fis;
    if (!spec.V.empty())
        for (int i = 0; i < n; ++i)
            out.potential += spec.V[static_cast<size_t>(i)] * st.rho[static_cast<size_t>(i)];
    if (!spec.W.empty()) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j)
                row += spec.W[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                       st.rho[static_cast<size_t>(j)];
            acc += st.rho[static_cast<size_t>(i)] * row;
        }
        out.interaction = 0.5 * acc;
    }
    out.total = out.kinetic + spec.beta * out.fisher + out.potential + out.interaction;
    return out;
}

double fisher_information(const WeightedGraph& g, const HamiltonianSpec& spec,
                          std::span<const double> rho, ExecPolicy policy) {
    if (rho.size() != static_cast<size_t>(g.n_nodes()))
        throw std::invalid_argument("rho dimension does not match graph");
    check_positive(rho);
    const auto& edges = g.edges();
    const int ne = static_cast<int>(edges.size());
    double fis = 0.0;
    const bool par = run_parallel(policy, ne);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : fis) if (par)
#endif
    for (int e = 0; e < ne; ++e) {
        const Edge& ed = edges[static_cast<size_t>(e)];
        const double dl = std::log(rho[static_cast<size_t>(ed.i)]) -
                          std::log(rho[static_cast<size_t>(ed.j)]);
        const double tht = theta_value(spec.theta_tilde, rho[static_cast<size_t>(ed.i)],
                                       rho[static_cast<size_t>(ed.j)], 0.0, 0.0);
        fis += ed.omega_tilde * dl * dl * tht;
    }
    (void)par;
    return fis;
}

std::vector<double> fisher_gradient(const WeightedGraph& g, const HamiltonianSpec& spec,
                                    std::span<const double> rho, ExecPolicy policy) {
    if (rho.size() != static_cast<size_t>(g.n_nodes()))
        throw std::invalid_argument("rho dimension does not match graph");
    check_positive(rho);
    const int n = g.n_nodes();
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    const bool logmean = spec.theta_tilde.kind == WeightKind::LogMean;
    auto node = [&](int i) {
        const double ri = rho[static_cast<size_t>(i)];
        double acc = 0.0;
        for (const auto& [j, e] : g.neighbors(i)) {
            const double rj = rho[static_cast<size_t>(j)];
            const double wt = g.edges()[static_cast<size_t>(e)].omega_tilde;
            if (logmean) {
                acc += wt * phi(rj / ri);
            } else {
                const double dl = std::log(ri) - std::log(rj);
                const double tht = theta_value(spec.theta_tilde, ri, rj, 0.0, 0.0);
                const double tha =
                    theta_partial(spec.theta_tilde, ri, rj, 0.0, 0.0, Wrt::First);
                acc += wt * (2.0 * dl * tht / ri + dl * dl * tha);
            }
        }
        out[static_cast<size_t>(i)] = acc;
    };
    if (run_parallel(policy, n)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < n; ++i) node(i);
    } else {
        for (int i = 0; i < n; ++i) node(i);
    }
    return out;
}

void grad_s(const WeightedGraph& g, const HamiltonianSpec& spec,
            std::span<const double> rho, std::span<const double> s,
            std::span<double> out, std::span<const double> s_orient,
            ExecPolicy policy) {
    check_sizes(g, rho, s);
    check_positive(rho);
    std::span<const double> os = s_orient.empty() ? s : s_orient;
    const int n = g.n_nodes();
    auto node = [&](int i) {
        double acc = 0.0;
        for (const auto& [j, e] : g.neighbors(i)) {
            const Edge& ed = g.edges()[static_cast<size_t>(e)];
            const double th =
                theta_value(spec.theta, rho[static_cast<size_t>(i)],
                            rho[static_cast<size_t>(j)], os[static_cast<size_t>(i)],
                            os[static_cast<size_t>(j)]);
            acc += ed.omega * (s[static_cast<size_t>(i)] - s[static_cast<size_t>(j)]) * th;
        }
        out[static_cast<size_t>(i)] = acc;
    };
    if (run_parallel(policy, n)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < n; ++i) node(i);
    } else {
        for (int i = 0; i < n; ++i) node(i);
    }
}

void grad_rho(const WeightedGraph& g, const HamiltonianSpec& spec,
              std::span<const double> rho, std::span<const double> s,
              std::span<double> out, std::span<const double> s_orient,
              ExecPolicy policy) {
    check_sizes(g, rho, s);
    check_positive(rho);
    std::span<const double> os = s_orient.empty() ? s : s_orient;
    const int n = g.n_nodes();
    const bool logmean = spec.theta_tilde.kind == WeightKind::LogMean;
    auto node = [&](int i) {
        const double ri = rho[static_cast<size_t>(i)];
        double acc = 0.0;
        for (const auto& [j, e] : g.neighbors(i)) {
            const Edge& ed = g.edges()[static_cast<size_t>(e)];
            const double ds = s[static_cast<size_t>(i)] - s[static_cast<size_t>(j)];
            const double tha =
                theta_partial(spec.theta, ri, rho[static_cast<size_t>(j)],
                              os[static_cast<size_t>(i)], os[static_cast<size_t>(j)],
                              Wrt::First);
            acc += 0.5 * ed.omega * ds * ds * tha;
            if (spec.beta > 0.0) {
                const double rj = rho[static_cast<size_t>(j)];
                if (logmean) {
                    acc += spec.beta * ed.omega_tilde * phi(rj / ri);
                } else {
                    const double dl = std::log(ri) - std::log(rj);
                    const double tht = theta_value(spec.theta_tilde, ri, rj, 0.0, 0.0);
                    const double ta =
                        theta_partial(spec.theta_tilde, ri, rj, 0.0, 0.0, Wrt::First);
                    acc += spec.beta * ed.omega_tilde *
                           (2.0 * dl * tht / ri + dl * dl * ta);
                }
            }
        }
        if (!spec.V.empty()) acc += spec.V[static_cast<size_t>(i)];
        if (!spec.W.empty()) {
            double row = 0.0;
            for (int j = 0; j < n; ++j)
                row += spec.W[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                       rho[static_cast<size_t>(j)];
            acc += row;
        }
        out[static_cast<size_t>(i)] = acc;
    };
    if (run_parallel(policy, n)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < n; ++i) node(i);
    } else {
        for (int i = 0; i < n; ++i) node(i);
    }
}

void vector_field(const WeightedGraph& g, const HamiltonianSpec& spec, const State& st,
                  std::span<double> drho_dt, std::span<double> ds_dt,
                  std::span<const double> s_orient, ExecPolicy policy) {
    grad_s(g, spec, st.rho, st.s, drho_dt, s_orient, policy);
    grad_rho(g, spec, st.rho, st.s, ds_dt, s_orient, policy);
    const int n = g.n_nodes();
    for (int i = 0; i < n; ++i) ds_dt[static_cast<size_t>(i)] = -ds_dt[static_cast<size_t>(i)];
}

void hessian_blocks(const WeightedGraph& g, const HamiltonianSpec& spec,
                    std::span<const double> rho, std::span<const double> s,
                    std::span<const double> s_orient,
                    std::vector<Triplet>& h_ss, std::vector<Triplet>& h_s_rho,
                    std::vector<Triplet>& h_rho_rho) {
    check_sizes(g, rho, s);
    std::span<const double> os = s_orient.empty() ? s : s_orient;
    h_ss.clear();
    h_s_rho.clear();
    h_rho_rho.clear();

    const bool logmean = spec.theta_tilde.kind == WeightKind::LogMean;
    for (const Edge& ed : g.edges()) {
        const int i = ed.i, j = ed.j;
        const double ri = rho[static_cast<size_t>(i)], rj = rho[static_cast<size_t>(j)];
        const double osi = os[static_cast<size_t>(i)], osj = os[static_cast<size_t>(j)];
        const double ds = s[static_cast<size_t>(i)] - s[static_cast<size_t>(j)];

        const double th = theta_value(spec.theta, ri, rj, osi, osj);
        const double ta = theta_partial(spec.theta, ri, rj, osi, osj, Wrt::First);
        const double tb = theta_partial(spec.theta, ri, rj, osi, osj, Wrt::Second);

        // d^2 K / dS dS
        h_ss.push_back({i, i, ed.omega * th});
        h_ss.push_back({j, j, ed.omega * th});
        h_ss.push_back({i, j, -ed.omega * th});
        h_ss.push_back({j, i, -ed.omega * th});

        // d^2 K / dS drho: H_S[i] = sum w (s_i - s_j) theta(rho_i, rho_j)
        h_s_rho.push_back({i, i, ed.omega * ds * ta});
        h_s_rho.push_back({i, j, ed.omega * ds * tb});
        h_s_rho.push_back({j, j, -ed.omega * ds * tb});
        h_s_rho.push_back({j, i, -ed.omega * ds * ta});

        // d^2 K / drho drho
        const double taa =
            theta_second_partial(spec.theta, ri, rj, osi, osj, Wrt::First, Wrt::First);
        const double tbb =
            theta_second_partial(spec.theta, ri, rj, osi, osj, Wrt::Second, Wrt::Second);
        const double tab =
            theta_second_partial(spec.theta, ri, rj, osi, osj, Wrt::First, Wrt::Second);
        const double half_wds2 = 0.5 * ed.omega * ds * ds;
        if (taa != 0.0) h_rho_rho.push_back({i, i, half_wds2 * taa});
        if (tbb != 0.0) h_rho_rho.push_back({j, j, half_wds2 * tbb});
        if (tab != 0.0) {
            h_rho_rho.push_back({i, j, half_wds2 * tab});
            h_rho_rho.push_back({j, i, half_wds2 * tab});
        }

        // beta * Hess I
        if (spec.beta > 0.0) {
            if (logmean) {
                const double c = spec.beta * ed.omega_tilde * (ri + rj);
                h_rho_rho.push_back({i, i, c / (ri * ri)});
                h_rho_rho.push_back({j, j, c / (rj * rj)});
                h_rho_rho.push_back({i, j, -c / (ri * rj)});
                h_rho_rho.push_back({j, i, -c / (ri * rj)});
            } else {
                const double dl = std::log(ri) - std::log(rj);
                const double ft = theta_value(spec.theta_tilde, ri, rj, 0.0, 0.0);
                const double fa = theta_partial(spec.theta_tilde, ri, rj, 0.0, 0.0, Wrt::First);
                const double fb = theta_partial(spec.theta_tilde, ri, rj, 0.0, 0.0, Wrt::Second);
                const double faa = theta_second_partial(spec.theta_tilde, ri, rj, 0.0, 0.0,
                                                        Wrt::First, Wrt::First);
                const double fbb = theta_second_partial(spec.theta_tilde, ri, rj, 0.0, 0.0,
                                                        Wrt::Second, Wrt::Second);
                const double fab = theta_second_partial(spec.theta_tilde, ri, rj, 0.0, 0.0,
                                                        Wrt::First, Wrt::Second);
                const double b = spec.beta * ed.omega_tilde;
                h_rho_rho.push_back(
                    {i, i, b * (2.0 * ft / (ri * ri) - 2.0 * dl * ft / (ri * ri) +
                                4.0 * dl * fa / ri + dl * dl * faa)});
                h_rho_rho.push_back(
                    {j, j, b * (2.0 * ft / (rj * rj) + 2.0 * dl * ft / (rj * rj) -
                                4.0 * dl * fb / rj + dl * dl * fbb)});
                const double mixed = b * (-2.0 * ft / (ri * rj) + 2.0 * dl * fb / ri -
                                          2.0 * dl * fa / rj + dl * dl * fab);
                h_rho_rho.push_back({i, j, mixed});
                h_rho_rho.push_back({j, i, mixed});
            }
        }
    }

    if (!spec.W.empty()) {
        const int n = g.n_nodes();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double w = spec.W[static_cast<size_t>(i)][static_cast<size_t>(j)];
                if (w != 0.0) h_rho_rho.push_back({i, j, w});
            }
    }
}

}  // namespace whflow
