#include "csdelay/feedback_lab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csdelay/errors.hpp"

namespace csdelay {

namespace {

double horner(const std::vector<double>& c, double s) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

double sum_coefficients(const std::vector<double>& c) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        acc += *it;
    }
    return acc;
}

}  // namespace

void FeedbackProblem::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidInputError("feedback gain lambda must be finite and > 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidInputError("feedback delay tau must be finite and > 0");
    }
    if (u0 == 0.0 || !std::isfinite(u0)) {
        throw InvalidInputError("feedback datum u0 must be finite and nonzero");
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw InvalidInputError("feedback horizon t_end must be finite and > 0");
    }
}

FeedbackSolution::FeedbackSolution(double tau, double u0, std::vector<std::vector<double>> pieces)
    : tau_(tau), u0_(u0), pieces_(std::move(pieces)) {}

double FeedbackSolution::local(std::size_t k, double s) const { return horner(pieces_.at(k), s); }

double FeedbackSolution::operator()(double t) const {
    if (t <= 0.0) {
        if (t < -tau_ * (1.0 + 1e-12)) {
            throw OutOfWindowError("feedback solution queried before -tau");
        }
        return u0_;
    }
    const double pos = t / tau_;
    auto k = static_cast<std::size_t>(std::floor(pos));
    double s = pos - static_cast<double>(k);
    if (k >= pieces_.size()) {
        if (k == pieces_.size() && s <= 1e-9) {
            k -= 1;
            s = 1.0;
        } else {
            throw OutOfWindowError("feedback solution queried beyond its horizon");
        }
    }
    return horner(pieces_[k], s);
}

std::vector<double> FeedbackSolution::evaluate(std::span<const double> times) const {
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        out.push_back((*this)(t));
    }
    return out;
}

FeedbackSolution exact_solve(const FeedbackProblem& problem) {
    problem.validate();
    const double intervals = std::ceil(problem.t_end / problem.tau - 1e-9);
    if (intervals > kMaxFeedbackIntervals) {
        throw HorizonError("exact feedback solver supports t_end <= " + std::to_string(kMaxFeedbackIntervals) +
                           " tau (" + std::to_string(kMaxFeedbackIntervals * problem.tau) + ")");
    }
    const auto count = static_cast<std::size_t>(std::max(1.0, intervals));
    const double lt = problem.lambda_tau();

    // p_k(s) = p_{k-1}(1) - lambda tau int_0^s p_{k-1}, with p_{-1} = u0.
    std::vector<std::vector<double>> pieces;
    pieces.reserve(count);
    std::vector<double> previous{problem.u0};
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> next(previous.size() + 1);
        next[0] = sum_coefficients(previous);
        for (std::size_t j = 0; j < previous.size(); ++j) {
            next[j + 1] = -lt * previous[j] / static_cast<double>(j + 1);
        }
        pieces.push_back(next);
        previous = std::move(next);
    }
    return {problem.tau, problem.u0, std::move(pieces)};
}

std::vector<double> exact_solve(const FeedbackProblem& problem, std::span<const double> times) {
    return exact_solve(problem).evaluate(times);
}

std::optional<double> first_sign_change(const FeedbackSolution& solution) {
    constexpr int kScan = 64;
    const double tau = solution.tau();
    double prev = solution.local(0, 0.0);
    for (std::size_t k = 0; k < solution.intervals(); ++k) {
        for (int j = 1; j <= kScan; ++j) {
            const double s = static_cast<double>(j) / kScan;
            const double value = solution.local(k, s);
            if (value == 0.0 || (value > 0.0) != (prev > 0.0)) {
                double lo = static_cast<double>(j - 1) / kScan;
                double hi = s;
                const bool lo_positive = prev > 0.0;
                while (hi - lo > 1e-12) {
                    const double mid = 0.5 * (lo + hi);
                    const double vm = solution.local(k, mid);
                    if (vm != 0.0 && (vm > 0.0) == lo_positive) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return tau * (static_cast<double>(k) + 0.5 * (lo + hi));
            }
            prev = value;
        }
    }
    return std::nullopt;
}

std::optional<double> first_sign_change(const FeedbackProblem& problem) {
    return first_sign_change(exact_solve(problem));
}

double threshold_bisect(double lo, double hi, double horizon_multiple, double tolerance) {
    if (!(lo > 0.0) || !(hi > lo) || !(horizon_multiple > 0.0) || !(tolerance > 0.0)) {
        throw InvalidInputError("threshold bisection needs 0 < lo < hi, a positive horizon and tolerance");
    }
    // Scale invariance: only lambda tau matters, so fix tau = 1.
    auto oscillates = [horizon_multiple](double lambda_tau) {
        const FeedbackProblem p{lambda_tau, 1.0, 1.0, horizon_multiple};
        return first_sign_change(p).has_value();
    };
    const bool at_lo = oscillates(lo);
    const bool at_hi = oscillates(hi);
    if (at_lo == at_hi) {
        throw BracketError("sign-change predicate is constant on [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
    }
    for (int it = 0; it < 200 && hi - lo >= tolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (oscillates(mid) == at_lo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

IntegrationResult integrate_feedback(const FeedbackProblem& problem, int m, bool retain_full) {
    problem.validate();
    const double lambda = problem.lambda;
    const DelayRhs rhs = [lambda](double, std::span<const double>, std::span<const double> delayed,
                                  std::span<double> out) { out[0] = -lambda * delayed[0]; };
    StepperConfig config;
    config.tau = problem.tau;
    config.m = m;
    config.t_end = problem.t_end;
    config.state_dim = 1;
    config.retain_full = retain_full;
    const double u0 = problem.u0;
    HistoryBuffer history = init_history([u0](double) { return Vector{u0}; }, problem.tau, m, retain_full);
    return integrate(rhs, std::move(history), config);
}

namespace {

double max_node_deviation(const FeedbackProblem& problem, const FeedbackSolution& exact, int m) {
    const IntegrationResult run = integrate_feedback(problem, m, true);
    const HistoryBuffer& h = run.history;
    double worst = 0.0;
    for (long k = 0; k <= h.last_index(); ++k) {
        const double t = h.time_at(k);
        if (t > exact.horizon()) break;
        worst = std::max(worst, std::abs(h.state(k)[0] - exact(t)));
    }
    return worst;
}

}  // namespace

CrossValidation cross_validate(const FeedbackProblem& problem, int m) {
    problem.validate();
    const FeedbackSolution exact = exact_solve(problem);
    CrossValidation cv;
    cv.max_deviation = max_node_deviation(problem, exact, m);
    cv.ms = {25, 50, 100};
    for (int level : cv.ms) {
        cv.errors.push_back(level == m ? cv.max_deviation : max_node_deviation(problem, exact, level));
    }
    for (std::size_t i = 1; i < cv.errors.size(); ++i) {
        cv.orders.push_back(std::log2(cv.errors[i - 1] / cv.errors[i]));
    }
    return cv;
}

}  // namespace csdelay
