#pragma once

// Constructive critical-delay recipe and regime thresholds of the delay
// negative feedback u' = -lambda u(t - tau).
//
// Conditions used throughout (L0 = L0(tau), M = M0):
//   N3:  lambda mu > 4 lambda e^(mu lambda tau / 2) + alpha sqrt(2 L0) / 2
//   D2:  lambda mu > max{ M, 4 lambda e^(mu lambda tau / 2) + alpha sqrt(2 L0) / 2 }
//   LT:  2 lambda tau e^(mu lambda tau) < 1

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdelay/cs_model.hpp"

namespace csdelay {

enum class FeedbackRegime { NonOscillatoryStable, OscillatoryStable, Unstable };
const char* to_string(FeedbackRegime regime);

/// (0, 1/e) non-oscillatory; [1/e, pi/2) damped oscillation; [pi/2, inf) unstable.
FeedbackRegime classify_feedback(double lambda_tau);

/// Real root of z e^(2 e z) = 1, bisection on [0.1, 0.4].
double solve_zstar();

enum class DatumPath { ConstantDatum, GeneralDatum };
const char* to_string(DatumPath path);

struct ConditionEntry {
    std::string id;
    bool satisfied = false;
    double margin = 0.0;  ///< worst (smallest) margin over the probes; > 0 means satisfied
};

struct CriticalDelayReport {
    double l0 = 0.0;  ///< L0 at the evaluation delay (or at tau_c)
    std::optional<double> m0;
    std::optional<double> k;
    double mu = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double tau_c = 0.0;
    std::optional<double> omega;  ///< at the evaluation delay, when one was given
    DatumPath path = DatumPath::ConstantDatum;
    std::vector<ConditionEntry> conditions;

    [[nodiscard]] const ConditionEntry* find(const std::string& id) const;
    [[nodiscard]] bool all_satisfied() const;
};

/// L0 for a constant datum: (2 lambda tau + 1) e^(2 lambda tau) V0 + 2 lambda^3 tau^3 D0.
double constant_datum_L0(double lambda, double tau, double V0, double D0);

/// Right-minus-left margins of the conditions; positive when satisfied.
double condition_n3_margin(double lambda, double mu, double alpha, double L0, double tau);
double condition_d2_margin(double lambda, double mu, double M0, double alpha, double L0, double tau);
double condition_lt_margin(double lambda, double mu, double tau);
/// (2/(lambda tau))(ln(1/(2 lambda tau)) - 1) - alpha sqrt(2 L0) / (2 lambda)
double simplified_condition_margin(double lambda, double alpha, double L0, double tau);
/// max{ M0, 4 lambda e^(mu lambda tau / 2) + alpha sqrt(2 L0) / 2 }
double condition_d2_rhs(double lambda, double mu, double M0, double alpha, double L0, double tau);

/// Constant-datum recipe: tau1 from the simplified condition with L0(tau) in
/// closed form, mu = alpha sqrt(2 L0(tau1)) / (2 lambda) + 2 / (lambda tau1),
/// tau2 the root of 2 lambda tau e^(mu lambda tau) = 1.
/// Throws TrivialDatumError when V0 <= 0 or D0 <= 0.
CriticalDelayReport critical_delay_constant(double lambda, double alpha, double V0, double D0,
                                            std::optional<double> tau_eval = std::nullopt);

/// General-datum recipe. tau1 solves (1/(lambda tau)) ln(1/(2 lambda tau)) = (1 + mu_margin) K,
/// mu is that value, tau2 is the largest tau <= tau1 with D2.
CriticalDelayReport critical_delay_general(double lambda, std::optional<double> M0,
                                           const std::function<double(double)>& L0_of_tau,
                                           double alpha,
                                           std::optional<double> tau_eval = std::nullopt,
                                           double mu_margin = 1e-3);

/// omega = -2 lambda e^(-mu lambda tau) (2 lambda tau e^(mu lambda tau) - 1)
double decay_rate(double lambda, double tau, double mu);

struct BackwardForwardCheck {
    bool passed = true;
    long checked = 0;
    long violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();  ///< kappa s - |ln(y(t-s)/y(t))|
    double worst_time = 0.0;
};

/// e^(-mu lambda tau) D(t) < D(t - tau) < e^(mu lambda tau) D(t) at every node t > 0.
/// `d_nodes` starts at node -m.
BackwardForwardCheck verify_backward_forward(std::span<const double> d_nodes, int m, double lambda,
                                             double mu, double tau);

/// e^(-kappa s) y(t) < y(t - s) < e^(kappa s) y(t) for nodes t > 0 and lags s = j h,
/// j = 1 .. max_lag, with t - s >= t_first. `y_nodes` starts at node `first_index`.
BackwardForwardCheck verify_backward_forward_generic(std::span<const double> y_nodes, long first_index,
                                                     double h, double kappa, int max_lag);

/// kappa > max{ M, C1 + C2 e^(kappa tau) }
bool backward_forward_hypothesis(double C1, double C2, double kappa, double M, double tau);

struct ScalingBase {
    double lambda = 1.0;
    Kernel kernel = Kernel::cucker_smale(0.3);
    std::size_t d = 2;
    double position_box = 1.0;
    double velocity_spread = 20.0;
    std::uint64_t seed = 2020;
};

struct ScalingRow {
    std::size_t n = 0;
    double V0 = 0.0;
    double D0 = 0.0;
    double tau_c = 0.0;
};

struct ScalingTable {
    std::vector<ScalingRow> rows;
    double slope = 0.0;  ///< least-squares slope of log tau_c against log N
};

ScalingTable n_scaling_sweep(const ScalingBase& base, std::span<const std::size_t> agent_counts);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace csdelay
