#pragma once

// Delay negative feedback u'(t) = -lambda u(t - tau) with constant datum u0
// on [-tau, 0]: exact method-of-steps solution, sign-change detection and
// recovery of the non-oscillation threshold lambda tau = 1/e.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "csdelay/dde_engine.hpp"

namespace csdelay {

/// Horizon limit of the exact solver, in delay intervals.
inline constexpr int kMaxFeedbackIntervals = 700;

struct FeedbackProblem {
    double lambda = 1.0;
    double tau = 1.0;
    double u0 = 1.0;
    double t_end = 10.0;

    void validate() const;
    [[nodiscard]] double lambda_tau() const { return lambda * tau; }
};

/// Piecewise polynomial solution. On [k tau, (k+1) tau] it is p_k((t - k tau) / tau)
/// with p_k of degree k + 1.
class FeedbackSolution {
public:
    FeedbackSolution(double tau, double u0, std::vector<std::vector<double>> pieces);

    [[nodiscard]] double tau() const { return tau_; }
    [[nodiscard]] std::size_t intervals() const { return pieces_.size(); }
    [[nodiscard]] double horizon() const { return tau_ * static_cast<double>(pieces_.size()); }
    /// Coefficients of p_k in the local variable, lowest degree first.
    [[nodiscard]] const std::vector<double>& coefficients(std::size_t k) const { return pieces_.at(k); }

    /// u(t) for t in [-tau, horizon()]; the datum for t <= 0.
    [[nodiscard]] double operator()(double t) const;
    /// p_k at local time s in [0, 1].
    [[nodiscard]] double local(std::size_t k, double s) const;
    [[nodiscard]] std::vector<double> evaluate(std::span<const double> times) const;

private:
    double tau_;
    double u0_;
    std::vector<std::vector<double>> pieces_;
};

/// Throws HorizonError beyond kMaxFeedbackIntervals delays.
FeedbackSolution exact_solve(const FeedbackProblem& problem);
std::vector<double> exact_solve(const FeedbackProblem& problem, std::span<const double> times);

/// First strict sign change of u on (0, t_end]: scan at tau/64, then bisection
/// on the local polynomial to 1e-12 tau.
std::optional<double> first_sign_change(const FeedbackProblem& problem);
std::optional<double> first_sign_change(const FeedbackSolution& solution);

/// Bisection in lambda tau on the predicate "u changes sign within
/// horizon_multiple delays"; returns the bracket midpoint once the bracket
/// is narrower than `tolerance`. Throws BracketError if the predicate agrees
/// at both ends.
double threshold_bisect(double lo, double hi, double horizon_multiple, double tolerance = 2e-3);

/// dde_engine run of the same problem on the node grid h = tau / m.
IntegrationResult integrate_feedback(const FeedbackProblem& problem, int m, bool retain_full = true);

struct CrossValidation {
    double max_deviation = 0.0;  ///< at the requested m
    std::vector<int> ms;         ///< refinement ladder
    std::vector<double> errors;  ///< max node deviation per m
    std::vector<double> orders;  ///< log2(error ratio) between consecutive ladder entries
};

/// Max node deviation between the engine and the exact solution, plus the
/// refinement ladder m in {25, 50, 100}.
CrossValidation cross_validate(const FeedbackProblem& problem, int m);

}  // namespace csdelay
