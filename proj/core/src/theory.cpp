#include "csdelay/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "csdelay/diagnostics.hpp"
#include "csdelay/errors.hpp"

namespace csdelay {

namespace {

constexpr int kMaxBisections = 200;
constexpr double kBracketTolerance = 1e-14;

// Root of f on [lo, hi] with f(lo), f(hi) of opposite sign.
template <typename F>
double bisect(F&& f, double lo, double hi) {
    double f_lo = f(lo);
    const double f_hi = f(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw BracketError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    const double tol = kBracketTolerance * (hi - lo);
    for (int it = 0; it < kMaxBisections && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Shrinks lo towards 0 until f(lo) > 0; f is assumed to blow up at 0+.
template <typename F>
double positive_lower_end(F&& f, double hi) {
    double lo = hi * 1e-3;
    for (int i = 0; i < 100 && !(f(lo) > 0.0); ++i) {
        lo *= 1e-3;
        if (lo < 1e-300) break;
    }
    if (!(f(lo) > 0.0)) {
        throw BracketError("could not bracket the critical delay near tau = 0");
    }
    return lo;
}

ConditionEntry grid_condition(const std::string& id, double tau_c, const std::function<double(double)>& margin) {
    ConditionEntry e{id, true, std::numeric_limits<double>::infinity()};
    auto probe = [&](double tau) {
        const double m = margin(tau);
        e.margin = std::min(e.margin, m);
        if (!(m > 0.0)) e.satisfied = false;
    };
    for (int k = 1; k <= 100; ++k) {
        probe(tau_c * k / 101.0);
    }
    probe(0.999 * tau_c);
    return e;
}

}  // namespace

const char* to_string(FeedbackRegime regime) {
    switch (regime) {
        case FeedbackRegime::NonOscillatoryStable: return "NonOscillatoryStable";
        case FeedbackRegime::OscillatoryStable: return "OscillatoryStable";
        case FeedbackRegime::Unstable: return "Unstable";
    }
    return "Unstable";
}

FeedbackRegime classify_feedback(double lambda_tau) {
    if (!(lambda_tau > 0.0) || !std::isfinite(lambda_tau)) {
        throw InvalidInputError("lambda * tau must be finite and > 0");
    }
    if (lambda_tau < 1.0 / std::numbers::e) {
        return FeedbackRegime::NonOscillatoryStable;
    }
    if (lambda_tau < 0.5 * std::numbers::pi) {
        return FeedbackRegime::OscillatoryStable;
    }
    return FeedbackRegime::Unstable;
}

double solve_zstar() {
    const double two_e = 2.0 * std::numbers::e;
    return bisect([two_e](double z) { return z * std::exp(two_e * z) - 1.0; }, 0.1, 0.4);
}

const char* to_string(DatumPath path) {
    return path == DatumPath::ConstantDatum ? "ConstantDatum" : "GeneralDatum";
}

const ConditionEntry* CriticalDelayReport::find(const std::string& id) const {
    for (const auto& c : conditions) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

bool CriticalDelayReport::all_satisfied() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionEntry& c) { return c.satisfied; });
}

double constant_datum_L0(double lambda, double tau, double V0, double D0) {
    const double lt = lambda * tau;
    return (2.0 * lt + 1.0) * std::exp(2.0 * lt) * V0 + 2.0 * lt * lt * lt * D0;
}

double condition_n3_margin(double lambda, double mu, double alpha, double L0, double tau) {
    return lambda * mu - (4.0 * lambda * std::exp(0.5 * mu * lambda * tau) + 0.5 * alpha * std::sqrt(2.0 * L0));
}

double condition_d2_rhs(double lambda, double mu, double M0, double alpha, double L0, double tau) {
    return std::max(M0, 4.0 * lambda * std::exp(0.5 * mu * lambda * tau) + 0.5 * alpha * std::sqrt(2.0 * L0));
}

double condition_d2_margin(double lambda, double mu, double M0, double alpha, double L0, double tau) {
    return lambda * mu - condition_d2_rhs(lambda, mu, M0, alpha, L0, tau);
}

double condition_lt_margin(double lambda, double mu, double tau) {
    return 1.0 - 2.0 * lambda * tau * std::exp(mu * lambda * tau);
}

double simplified_condition_margin(double lambda, double alpha, double L0, double tau) {
    const double lt = lambda * tau;
    return (2.0 / lt) * (std::log(1.0 / (2.0 * lt)) - 1.0) - alpha * std::sqrt(2.0 * L0) / (2.0 * lambda);
}

double decay_rate(double lambda, double tau, double mu) {
    return -2.0 * lambda * std::exp(-mu * lambda * tau) * (2.0 * lambda * tau * std::exp(mu * lambda * tau) - 1.0);
}

CriticalDelayReport critical_delay_constant(double lambda, double alpha, double V0, double D0,
                                            std::optional<double> tau_eval) {
    if (!(lambda > 0.0) || !(alpha >= 0.0) || !std::isfinite(V0) || !std::isfinite(D0)) {
        throw InvalidInputError("critical delay needs lambda > 0, alpha >= 0 and finite V0, D0");
    }
    if (!(V0 > 0.0) || !(D0 > 0.0)) {
        throw TrivialDatumError("all initial velocities coincide; flocking is immediate");
    }
    auto L0 = [&](double tau) { return constant_datum_L0(lambda, tau, V0, D0); };
    auto g = [&](double tau) { return simplified_condition_margin(lambda, alpha, L0(tau), tau); };

    CriticalDelayReport r;
    r.path = DatumPath::ConstantDatum;
    const double hi = 1.0 / (2.0 * std::numbers::e * lambda);
    if (alpha == 0.0) {
        r.tau1 = hi;
    } else {
        r.tau1 = bisect(g, positive_lower_end(g, hi), hi);
    }
    r.mu = alpha * std::sqrt(2.0 * L0(r.tau1)) / (2.0 * lambda) + 2.0 / (lambda * r.tau1);
    const double mu = r.mu;
    r.tau2 = bisect([&](double tau) { return -condition_lt_margin(lambda, mu, tau); }, 0.0, 1.0 / (2.0 * lambda));
    r.tau_c = std::min(r.tau1, r.tau2);
    const double tau_ref = tau_eval.value_or(r.tau_c);
    r.l0 = L0(tau_ref);
    if (tau_eval) {
        r.omega = decay_rate(lambda, *tau_eval, mu);
    }

    r.conditions.push_back(grid_condition("Ass:N3", r.tau_c, [&](double tau) {
        return condition_n3_margin(lambda, mu, alpha, L0(tau), tau);
    }));
    r.conditions.push_back(grid_condition("ass:lt", r.tau_c, [&](double tau) {
        return condition_lt_margin(lambda, mu, tau);
    }));
    {
        const double tau = 0.999 * r.tau1;
        const double m = g(tau);
        r.conditions.push_back({"cond:simplified@0.999tau1", m > 0.0, m});
    }
    {
        const double tau = 1.001 * r.tau1;
        const double m = -g(tau);
        r.conditions.push_back({"cond:simplified_fails@1.001tau1", m > 0.0, m});
    }
    {
        const double m = 1.0 / (2.0 * std::numbers::e) - lambda * r.tau_c;
        r.conditions.push_back({"necessary:lambda_tau_c<1/(2e)", m > 0.0, m});
    }
    {
        const double tau = 1.5 * r.tau_c;
        const double m = -std::min(condition_n3_margin(lambda, mu, alpha, L0(tau), tau),
                                   condition_lt_margin(lambda, mu, tau));
        r.conditions.push_back({"fails@1.5tau_c", m > 0.0, m});
    }
    return r;
}

CriticalDelayReport critical_delay_general(double lambda, std::optional<double> M0,
                                           const std::function<double(double)>& L0_of_tau, double alpha,
                                           std::optional<double> tau_eval, double mu_margin) {
    if (!(lambda > 0.0) || !(alpha >= 0.0) || !(mu_margin > 0.0)) {
        throw InvalidInputError("critical delay needs lambda > 0, alpha >= 0 and a positive mu margin");
    }
    if (!M0) {
        throw TrivialDatumError("D(0) = 0: all initial velocities coincide; flocking is immediate");
    }
    if (!(*M0 >= 0.0) || !std::isfinite(*M0)) {
        throw InvalidInputError("M0 must be finite and >= 0");
    }
    const double V0 = L0_of_tau(0.0);
    CriticalDelayReport r;
    r.path = DatumPath::GeneralDatum;
    r.m0 = *M0;
    const double K = std::max(*M0, 4.0 * lambda + 0.5 * alpha * std::sqrt(2.0 * V0)) / lambda;
    r.k = K;
    const double target = (1.0 + mu_margin) * K;
    auto rate = [lambda](double tau) {
        const double lt = lambda * tau;
        return std::log(1.0 / (2.0 * lt)) / lt;
    };
    const double hi = 0.5 / lambda;
    auto f1 = [&](double tau) { return rate(tau) - target; };
    r.tau1 = bisect(f1, positive_lower_end(f1, hi), hi);
    r.mu = rate(r.tau1);
    const double mu = r.mu;
    auto d2 = [&](double tau) { return condition_d2_margin(lambda, mu, *M0, alpha, L0_of_tau(tau), tau); };
    if (d2(r.tau1) > 0.0) {
        r.tau2 = r.tau1;
    } else {
        r.tau2 = bisect(d2, 0.0, r.tau1);
    }
    r.tau_c = std::min(r.tau1, r.tau2);
    const double tau_ref = tau_eval.value_or(r.tau_c);
    r.l0 = L0_of_tau(tau_ref);
    if (tau_eval) {
        r.omega = decay_rate(lambda, *tau_eval, mu);
    }

    r.conditions.push_back({"mu>K", mu > K, mu - K});
    r.conditions.push_back(grid_condition("ass:D2", r.tau_c, d2));
    r.conditions.push_back(grid_condition("ass:lt", r.tau_c, [&](double tau) {
        return condition_lt_margin(lambda, mu, tau);
    }));
    {
        const double m = 1.0 / (2.0 * std::numbers::e) - lambda * r.tau_c;
        r.conditions.push_back({"necessary:lambda_tau_c<1/(2e)", m > 0.0, m});
    }
    {
        const double tau = 1.5 * r.tau_c;
        const double m = -std::min(d2(tau), condition_lt_margin(lambda, mu, tau));
        r.conditions.push_back({"fails@1.5tau_c", m > 0.0, m});
    }
    return r;
}

namespace {

void note_bf(BackwardForwardCheck& check, double margin, double t) {
    ++check.checked;
    if (margin < check.worst_margin) {
        check.worst_margin = margin;
        check.worst_time = t;
    }
    if (!(margin > 0.0)) {
        ++check.violations;
        check.passed = false;
    }
}

double log_ratio_margin(double past, double now, double bound) {
    if (!(past > 0.0) || !(now > 0.0)) {
        return -std::numeric_limits<double>::infinity();
    }
    return bound - std::abs(std::log(past / now));
}

}  // namespace

BackwardForwardCheck verify_backward_forward(std::span<const double> d_nodes, int m, double lambda, double mu,
                                             double tau) {
    if (m < 1 || d_nodes.size() < static_cast<std::size_t>(m) + 2) {
        throw InvalidInputError("backward-forward check needs nodes -m .. 1 at least");
    }
    BackwardForwardCheck check;
    const double bound = mu * lambda * tau;
    const double h = tau / m;
    for (std::size_t p = static_cast<std::size_t>(m) + 1; p < d_nodes.size(); ++p) {
        const double t = h * static_cast<double>(static_cast<long>(p) - m);
        note_bf(check, log_ratio_margin(d_nodes[p - static_cast<std::size_t>(m)], d_nodes[p], bound), t);
    }
    return check;
}

BackwardForwardCheck verify_backward_forward_generic(std::span<const double> y_nodes, long first_index, double h,
                                                     double kappa, int max_lag) {
    if (!(h > 0.0) || max_lag < 1) {
        throw InvalidInputError("generic backward-forward check needs h > 0 and max_lag >= 1");
    }
    BackwardForwardCheck check;
    for (std::size_t p = 0; p < y_nodes.size(); ++p) {
        const long node = first_index + static_cast<long>(p);
        if (node <= 0) continue;
        for (int j = 1; j <= max_lag && static_cast<std::size_t>(j) <= p; ++j) {
            const double s = h * j;
            note_bf(check, log_ratio_margin(y_nodes[p - static_cast<std::size_t>(j)], y_nodes[p], kappa * s),
                    h * static_cast<double>(node));
        }
    }
    return check;
}

bool backward_forward_hypothesis(double C1, double C2, double kappa, double M, double tau) {
    return kappa > std::max(M, C1 + C2 * std::exp(kappa * tau));
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidInputError("slope fit needs two or more matching points");
    }
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingTable n_scaling_sweep(const ScalingBase& base, std::span<const std::size_t> agent_counts) {
    ScalingTable table;
    std::vector<double> xs, ys;
    for (std::size_t n : agent_counts) {
        const EnsembleState cloud =
            random_cloud(n, base.d, base.position_box, base.velocity_spread, base.seed + n);
        ScalingRow row;
        row.n = n;
        row.V0 = velocity_fluctuation(cloud);
        row.D0 = weighted_fluctuation(cloud, base.kernel);
        row.tau_c = critical_delay_constant(base.lambda, base.kernel.alpha(), row.V0, row.D0).tau_c;
        table.rows.push_back(row);
        xs.push_back(static_cast<double>(n));
        ys.push_back(row.tau_c);
    }
    if (xs.size() >= 2) {
        table.slope = loglog_slope(xs, ys);
    }
    return table;
}

}  // namespace csdelay
