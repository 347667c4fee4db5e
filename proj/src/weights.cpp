#include "whflow/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace whflow {

namespace {

void check_domain(double rho_i, double rho_j) {
    if (!(rho_i > 0.0) || !(rho_j > 0.0))
        throw std::domain_error("weight evaluated at nonpositive density");
}

// Logarithmic mean (a-b)/(log a - log b) with derivatives in the first
// argument plus the mixed second derivative.  Near a = b the closed form is
// 0/0; we switch to the representation
//   theta = m * g(u),  m = (a+b)/2,  u = (a-b)/(a+b),  g(u) = u / atanh(u),
// with g = 1/s and s(u) = 1 + u^2/3 + u^4/5 + u^6/7 truncated where the
// neglected term is O(u^8) (far below double precision at the switch).
struct LogMeanDerivs {
    double value;
    double da;    // d/da
    double daa;   // d^2/da^2
    double dab;   // d^2/da db
};

// log(a/b) without the catastrophic cancellation of log(a) - log(b) when
// a is close to b (the ratio difference (a-b)/b is exact there).
double log_ratio(double a, double b) {
    const double q = a / b;
    if (q > 0.5 && q < 2.0) return std::log1p((a - b) / b);
    return std::log(a) - std::log(b);
}

LogMeanDerivs logmean_derivs(double a, double b, double threshold) {
    LogMeanDerivs r;
    const double L = log_ratio(a, b);
    if (std::abs(L) >= threshold) {
        const double th = (a - b) / L;
        const double da = (1.0 - th / a) / L;
        const double db = (th / b - 1.0) / L;
        r.value = th;
        r.da = da;
        r.daa = -(1.0 - th / a) / (a * L * L) - da / (a * L) + th / (a * a * L);
        r.dab = (1.0 - th / a) / (b * L * L) - db / (a * L);
        return r;
    }
    const double m = 0.5 * (a + b);
    const double u = (a - b) / (a + b);
    const double u2 = u * u;
    const double s = 1.0 + u2 * (1.0 / 3.0 + u2 * (1.0 / 5.0 + u2 * (1.0 / 7.0)));
    const double sp = u * (2.0 / 3.0 + u2 * (4.0 / 5.0 + u2 * (6.0 / 7.0)));
    const double spp = 2.0 / 3.0 + u2 * (12.0 / 5.0 + u2 * (30.0 / 7.0));
    const double g = 1.0 / s;
    const double gp = -sp * g * g;
    const double gpp = -spp * g * g + 2.0 * sp * sp * g * g * g;
    const double ab = a + b;
    const double ua = 2.0 * b / (ab * ab);
    const double ub = -2.0 * a / (ab * ab);
    r.value = m * g;
    r.da = 0.5 * g + gp * (b / ab);
    r.daa = 0.5 * gp * ua + gpp * ua * (b / ab) - gp * b / (ab * ab);
    r.dab = 0.5 * gp * ub + gpp * ub * (b / ab) + gp * a / (ab * ab);
    return r;
}

// Upwind orientation: -1 when s_j < s_i (weight is rho_j), +1 when s_j > s_i
// (weight is rho_i), 0 on ties.
int upwind_side(double s_i, double s_j) {
    if (s_j > s_i) return +1;
    if (s_j < s_i) return -1;
    return 0;
}

}  // namespace

double theta_value(const WeightRule& rule, double rho_i, double rho_j,
                   double s_i, double s_j) {
    check_domain(rho_i, rho_j);
    switch (rule.kind) {
        case WeightKind::Average:
            return 0.5 * (rho_i + rho_j);
        case WeightKind::LogMean:
            return logmean_derivs(rho_i, rho_j, rule.taylor_threshold).value;
        case WeightKind::Upwind: {
            int side = upwind_side(s_i, s_j);
            if (side > 0) return rho_i;
            if (side < 0) return rho_j;
            return 0.5 * (rho_i + rho_j);
        }
    }
    throw std::logic_error("unreachable weight kind");
}

double theta_partial(const WeightRule& rule, double rho_i, double rho_j,
                     double s_i, double s_j, Wrt wrt) {
    check_domain(rho_i, rho_j);
    switch (rule.kind) {
        case WeightKind::Average:
            return 0.5;
        case WeightKind::LogMean:
            return wrt == Wrt::First
                       ? logmean_derivs(rho_i, rho_j, rule.taylor_threshold).da
                       : logmean_derivs(rho_j, rho_i, rule.taylor_threshold).da;
        case WeightKind::Upwind: {
            int side = upwind_side(s_i, s_j);
            if (side == 0) return 0.5;
            bool first_is_weight = side > 0;
            return (wrt == Wrt::First) == first_is_weight ? 1.0 : 0.0;
        }
    }
    throw std::logic_error("unreachable weight kind");
}

double theta_second_partial(const WeightRule& rule, double rho_i, double rho_j,
                            double s_i, double s_j, Wrt first, Wrt second) {
    check_domain(rho_i, rho_j);
    (void)s_i;
    (void)s_j;
    if (rule.kind != WeightKind::LogMean) return 0.0;
    if (first != second)
        return logmean_derivs(rho_i, rho_j, rule.taylor_threshold).dab;
    return first == Wrt::First
               ? logmean_derivs(rho_i, rho_j, rule.taylor_threshold).daa
               : logmean_derivs(rho_j, rho_i, rule.taylor_threshold).daa;
}

WeightRule make_weight_rule(std::string_view token) {
    if (token == "upwind") return {WeightKind::Upwind};
    if (token == "average") return {WeightKind::Average};
    if (token == "logmean") return {WeightKind::LogMean};
    throw std::invalid_argument("unknown weight rule token: " + std::string(token));
}

std::string weight_token(WeightKind kind) {
    switch (kind) {
        case WeightKind::Upwind: return "upwind";
        case WeightKind::Average: return "average";
        case WeightKind::LogMean: return "logmean";
    }
    return "?";
}

}  // namespace whflow
