#include "whflow/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace whflow {

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }
double neg(double x) { return x < 0.0 ? x : 0.0; }

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

}  // namespace

AlphaSelection select_alpha(std::span<const double> s, double tau, double h) {
    const int n = static_cast<int>(s.size());
    if (n < 3) throw std::invalid_argument("select_alpha needs a periodic lattice (n >= 3)");
    if (!(tau > 0.0) || !(h > 0.0))
        throw std::invalid_argument("select_alpha: tau and h must be positive");
    const double lam = tau / (h * h);
    double max_abs_diff = 0.0;
    double max_pair = 0.0;  // max over i of (S_{i+1}-S_i)^+ + (S_{i-1}-S_i)^+
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n;
        const int im = (i + n - 1) % n;
        const double dp = s[static_cast<size_t>(ip)] - s[static_cast<size_t>(i)];
        const double dm = s[static_cast<size_t>(im)] - s[static_cast<size_t>(i)];
        max_abs_diff = std::max(max_abs_diff, std::abs(dp));
        max_pair = std::max(max_pair, pos(dp) + pos(dm));
    }
    AlphaSelection sel;
    sel.R = max_abs_diff / h;
    sel.alpha = lam * max_abs_diff;  // = R*tau/h, the least alpha meeting (ii),(iii)
    if (sel.alpha >= 0.5)
        throw CflError("CFL failure: required viscosity alpha = " +
                       std::to_string(sel.alpha) + " >= 1/2");
    if (1.0 - lam * max_pair - 2.0 * sel.alpha < 0.0)
        throw CflError("CFL failure: monotonicity inequality (i) infeasible at alpha = " +
                       std::to_string(sel.alpha));
    return sel;
}

bool monotonicity_ok(std::span<const double> s, const ViscosityConfig& cfg) {
    const int n = static_cast<int>(s.size());
    if (!(cfg.alpha >= 0.0) || cfg.alpha >= 0.5) return false;
    const double lam = cfg.tau / (cfg.h * cfg.h);
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n;
        const int im = (i + n - 1) % n;
        const double dp = pos(s[static_cast<size_t>(ip)] - s[static_cast<size_t>(i)]);
        const double dm = pos(s[static_cast<size_t>(im)] - s[static_cast<size_t>(i)]);
        if (1.0 - lam * (dp + dm) - 2.0 * cfg.alpha < 0.0) return false;
        if (cfg.alpha - lam * dp < 0.0) return false;
        if (cfg.alpha - lam * dm < 0.0) return false;
    }
    return true;
}

State step_viscosity_upwind(const State& st, const ViscosityConfig& cfg,
                            ExecPolicy policy) {
    const int n = static_cast<int>(st.rho.size());
    if (static_cast<int>(st.s.size()) != n)
        throw std::invalid_argument("state arrays differ in size");
    if (n < 3) throw std::invalid_argument("viscosity scheme needs n >= 3");
    if (!monotonicity_ok(st.s, cfg))
        throw MonotonicityError("viscosity step called with inadmissible alpha/tau/h");

    const double lam = cfg.tau / (cfg.h * cfg.h);
    State next;
    next.rho.resize(static_cast<size_t>(n));
    next.s.resize(static_cast<size_t>(n));
    next.t = st.t + cfg.tau;

    if (run_parallel(policy, n)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int i = 0; i < n; ++i) {
            const int ip = (i + 1) % n;
            const int im = (i + n - 1) % n;
            const double dp = st.s[static_cast<size_t>(i)] - st.s[static_cast<size_t>(ip)];
            const double dm = st.s[static_cast<size_t>(i)] - st.s[static_cast<size_t>(im)];
            next.rho[static_cast<size_t>(i)] =
                st.rho[static_cast<size_t>(i)] +
                lam * (pos(dp) * st.rho[static_cast<size_t>(ip)] +
                       pos(dm) * st.rho[static_cast<size_t>(im)] +
                       (neg(dp) + neg(dm)) * st.rho[static_cast<size_t>(i)]);
        }
    } else {
        // per-edge fluxes: node i and node i+1 exchange the same number
        std::vector<double> flux(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int ip = (i + 1) % n;
            const double d = st.s[static_cast<size_t>(i)] - st.s[static_cast<size_t>(ip)];
            flux[static_cast<size_t>(i)] =
                lam * (pos(d) * st.rho[static_cast<size_t>(ip)] -
                       pos(-d) * st.rho[static_cast<size_t>(i)]);
        }
        for (int i = 0; i < n; ++i) {
            const int im = (i + n - 1) % n;
            next.rho[static_cast<size_t>(i)] = st.rho[static_cast<size_t>(i)] +
                                               flux[static_cast<size_t>(i)] -
                                               flux[static_cast<size_t>(im)];
        }
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (run_parallel(policy, n))
#endif
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n;
        const int im = (i + n - 1) % n;
        const double dp = st.s[static_cast<size_t>(i)] - st.s[static_cast<size_t>(ip)];
        const double dm = st.s[static_cast<size_t>(i)] - st.s[static_cast<size_t>(im)];
        const double np = neg(dp), nm = neg(dm);
        next.s[static_cast<size_t>(i)] =
            st.s[static_cast<size_t>(i)] -
            0.5 * (cfg.tau / (cfg.h * cfg.h)) * (np * np + nm * nm) +
            cfg.alpha * (st.s[static_cast<size_t>(ip)] - 2.0 * st.s[static_cast<size_t>(i)] +
                         st.s[static_cast<size_t>(im)]);
    }
    return next;
}

SteadyResult run_to_steady(const State& st0, const SteadyOptions& options) {
    SteadyResult out;
    out.state = st0;
    auto range = [](std::span<const double> s) {
        auto [lo, hi] = std::minmax_element(s.begin(), s.end());
        return *hi - *lo;
    };
    for (long k = 0; k < options.max_steps; ++k) {
        if (range(out.state.s) <= options.range_tol) {
            out.converged = true;
            return out;
        }
        ViscosityConfig cfg;
        cfg.tau = options.tau;
        cfg.h = options.h;
        if (options.fixed_alpha) {
            cfg.alpha = *options.fixed_alpha;
            double max_abs = 0.0;
            const int n = static_cast<int>(out.state.s.size());
            for (int i = 0; i < n; ++i) {
                const int ip = (i + 1) % n;
                max_abs = std::max(max_abs, std::abs(out.state.s[static_cast<size_t>(ip)] -
                                                     out.state.s[static_cast<size_t>(i)]));
            }
            cfg.R = max_abs / options.h;
        } else {
            AlphaSelection sel = select_alpha(out.state.s, options.tau, options.h);
            cfg.alpha = sel.alpha;
            cfg.R = sel.R;
        }
        out.state = step_viscosity_upwind(out.state, cfg);
        out.steps = k + 1;
    }
    out.converged = range(out.state.s) <= options.range_tol;
    return out;
}

}  // namespace whflow
