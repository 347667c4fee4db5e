#pragma once

#include <string>
#include <string_view>

namespace whflow {

enum class WeightKind { Upwind, Average, LogMean };

/// Density-dependent edge probability weight.  Average and LogMean are
/// symmetric functions of (rho_i, rho_j) with value(x,x) = x and
/// d value/d rho_i (x,x) = 1/2; Upwind selects the density of the node with
/// the smaller potential (ties take the arithmetic mean).
struct WeightRule {
    WeightKind kind = WeightKind::Average;
    /// LogMean switches to a series expansion when |log rho_i - log rho_j|
    /// falls below this threshold (the closed form is 0/0 at equal densities).
    double taylor_threshold = 1e-5;
};

enum class Wrt { First, Second };

/// Weight value theta_ij(rho).  s_i, s_j are consulted only by Upwind.
/// Throws std::domain_error on nonpositive densities.
double theta_value(const WeightRule& rule, double rho_i, double rho_j,
                   double s_i, double s_j);

/// Exact partial derivative of theta_value in the chosen argument.
double theta_partial(const WeightRule& rule, double rho_i, double rho_j,
                     double s_i, double s_j, Wrt wrt);

/// Second partial derivatives, used by the analytic Newton Jacobian.
/// Upwind (piecewise linear) and Average return zero.
double theta_second_partial(const WeightRule& rule, double rho_i, double rho_j,
                            double s_i, double s_j, Wrt first, Wrt second);

/// Config tokens: "upwind", "average", "logmean".
WeightRule make_weight_rule(std::string_view token);
std::string weight_token(WeightKind kind);

}  // namespace whflow
