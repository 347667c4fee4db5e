// Shared test utilities: deterministic random states and the independent
// finite-difference oracles used to pin expected values.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "whflow/graph.hpp"
#include "whflow/hamiltonian.hpp"

namespace whflow::test {

/// Random interior state: rho entries in [lo, hi] before normalization to
/// unit mass, potentials in [-s_amp, s_amp].  Deterministic for a fixed seed.
inline State random_state(int n, std::mt19937& rng, double lo = 0.05, double hi = 1.0,
                          double s_amp = 1.0) {
    std::uniform_real_distribution<double> ur(lo, hi);
    std::uniform_real_distribution<double> us(-s_amp, s_amp);
    State st;
    st.rho.resize(static_cast<size_t>(n));
    st.s.resize(static_cast<size_t>(n));
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        st.rho[static_cast<size_t>(i)] = ur(rng);
        mass += st.rho[static_cast<size_t>(i)];
        st.s[static_cast<size_t>(i)] = us(rng);
    }
    for (double& r : st.rho) r /= mass;
    return st;
}

/// Random tangent with zero component sum (mass-preserving direction).
inline std::vector<double> random_tangent(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> sigma(static_cast<size_t>(n));
    double mean = 0.0;
    for (double& v : sigma) {
        v = u(rng);
        mean += v;
    }
    mean /= n;
    double norm = 0.0;
    for (double& v : sigma) {
        v -= mean;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : sigma) v /= norm;
    return sigma;
}

/// Central finite difference of a scalar function of one coordinate.
template <class F>
double central_diff(F&& f, double x, double eps) {
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

/// Central finite-difference gradient of a scalar function of a vector.
template <class F>
std::vector<double> fd_gradient(F&& f, std::vector<double> x, double eps) {
    std::vector<double> g(x.size());
    for (size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + eps;
        const double fp = f(x);
        x[k] = saved - eps;
        const double fm = f(x);
        x[k] = saved;
        g[k] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

/// Relative error with a unit floor; entries that pass near zero are compared
/// absolutely (a pure quotient is ill-posed there).
inline double floored_rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace whflow::test
