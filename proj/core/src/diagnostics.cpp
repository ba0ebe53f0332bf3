#include "csdelay/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csdelay/errors.hpp"

namespace csdelay {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

void require_same_shape(const EnsembleState& a, const EnsembleState& b) {
    if (a.n != b.n || a.d != b.d) {
        throw InvalidInputError("ensembles differ in shape");
    }
}

}  // namespace

double velocity_fluctuation(const EnsembleState& state) {
    double sum = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t j = i + 1; j < state.n; ++j) {
            sum += squared_distance(state.velocity(i), state.velocity(j));
        }
    }
    // 1/2 over ordered pairs == sum over unordered pairs.
    return sum;
}

double weighted_fluctuation(const EnsembleState& state, const Kernel& kernel) {
    double sum = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t j = i + 1; j < state.n; ++j) {
            const double w = kernel.from_squared(squared_distance(state.position(i), state.position(j)));
            sum += w * squared_distance(state.velocity(i), state.velocity(j));
        }
    }
    return sum;
}

double velocity_fluctuation_rate(const EnsembleState& state, const EnsembleState& rate) {
    require_same_shape(state, rate);
    const std::size_t d = state.d;
    double sum = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t j = i + 1; j < state.n; ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                const double dv = state.v[i * d + k] - state.v[j * d + k];
                const double da = rate.v[i * d + k] - rate.v[j * d + k];
                sum += dv * da;
            }
        }
    }
    return 2.0 * sum;
}

double weighted_fluctuation_rate(const EnsembleState& state, const EnsembleState& rate,
                                 const Kernel& kernel) {
    require_same_shape(state, rate);
    const std::size_t d = state.d;
    double sum = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t j = i + 1; j < state.n; ++j) {
            double r2 = 0.0, dv2 = 0.0, dv_da = 0.0, dx_dw = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double dx = state.x[i * d + k] - state.x[j * d + k];
                const double dv = state.v[i * d + k] - state.v[j * d + k];
                const double dw = rate.x[i * d + k] - rate.x[j * d + k];
                const double da = rate.v[i * d + k] - rate.v[j * d + k];
                r2 += dx * dx;
                dv2 += dv * dv;
                dv_da += dv * da;
                dx_dw += dx * dw;
            }
            const double r = std::sqrt(r2);
            const double psi = kernel.from_squared(r2);
            double radial = 0.0;
            if (r >= 1e-14) {
                radial = kernel.derivative(r) * (dx_dw / r) * dv2;
            }
            // Unordered pair counted once: the 1/2 and the factor 2 of the ordered sums cancel.
            sum += radial + 2.0 * psi * dv_da;
        }
    }
    return sum;
}

double weighted_fluctuation_derivative(const EnsembleState& state, const EnsembleState& delayed,
                                       const ModelParams& params) {
    const EnsembleState rate = cs_rhs(0.0, state, delayed, params);
    return weighted_fluctuation_rate(state, rate, params.kernel);
}

double position_diameter(const EnsembleState& state) {
    double best = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t j = i + 1; j < state.n; ++j) {
            best = std::max(best, squared_distance(state.position(i), state.position(j)));
        }
    }
    return std::sqrt(best);
}

double min_interaction(const EnsembleState& state, const Kernel& kernel) {
    return kernel(position_diameter(state));
}

Vector momentum(const EnsembleState& state) {
    Vector p(state.d, 0.0);
    for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t k = 0; k < state.d; ++k) {
            p[k] += state.v[i * state.d + k];
        }
    }
    return p;
}

SeriesRecorder::SeriesRecorder(ModelParams params, std::size_t agents, std::size_t dim, int m, double h)
    : params_(std::move(params)), n_(agents), d_(dim) {
    series_.tau = params_.tau;
    series_.m = m;
    series_.h = h;
    series_.first_index = 0;
}

void SeriesRecorder::record(double t, const EnsembleState& state, const EnsembleState& rate) {
    const Kernel& kernel = params_.kernel;
    series_.t.push_back(t);
    series_.V.push_back(velocity_fluctuation(state));
    series_.D.push_back(weighted_fluctuation(state, kernel));
    series_.V_rate.push_back(velocity_fluctuation_rate(state, rate));
    series_.D_rate.push_back(weighted_fluctuation_rate(state, rate, kernel));
    const double dx = position_diameter(state);
    series_.dX.push_back(dx);
    series_.phi.push_back(kernel(dx));
    series_.momentum.push_back(momentum(state));
}

void SeriesRecorder::record_datum(const InitialDatum& datum) {
    if (!series_.t.empty()) {
        throw InvalidInputError("datum must be recorded before the run");
    }
    const int m = series_.m;
    series_.first_index = -m;
    for (long k = -m; k < 0; ++k) {
        const double s = params_.tau * static_cast<double>(k) / m;
        record(s, datum.state(s), datum.rate(s));
    }
}

Observer SeriesRecorder::observer() {
    return [this](const NodeView& view) {
        const EnsembleState state = EnsembleState::unpack(view.state, n_, d_);
        const EnsembleState rate = EnsembleState::unpack(view.derivative, n_, d_);
        record(view.t, state, rate);
    };
}

double lyapunov(double V_now, std::span<const double> delayed_window, double tau, double lambda) {
    if (delayed_window.size() < 2) {
        throw InvalidInputError("Lyapunov window needs at least two nodes");
    }
    const auto m = static_cast<double>(delayed_window.size() - 1);
    const double h = tau / m;
    // Weights (s - (t - tau)) = k h, which vanish at the left end.
    double acc = 0.0;
    for (std::size_t k = 1; k + 1 < delayed_window.size(); ++k) {
        acc += static_cast<double>(k) * delayed_window[k];
    }
    acc += 0.5 * m * delayed_window.back();
    const double integral = h * h * acc;
    return V_now + 4.0 * tau * lambda * lambda * lambda * integral;
}

double lyapunov(const NodeSeries& series, long node, const ModelParams& params) {
    const int m = series.m;
    if (m <= 0 || params.tau <= 0.0) {
        throw InvalidInputError("Lyapunov functional needs a delayed run");
    }
    if (node < m || !series.contains(node) || !series.contains(node - 2L * m)) {
        throw InvalidInputError("Lyapunov functional needs t >= tau and history back to t - 2 tau");
    }
    const std::size_t begin = series.pos(node - 2L * m);
    const std::span<const double> window(series.D.data() + begin, static_cast<std::size_t>(m) + 1);
    return lyapunov(series.V[series.pos(node)], window, params.tau, params.lambda);
}

DiagnosticsRecord make_record(const NodeSeries& series, long node, const ModelParams& params) {
    const std::size_t p = series.pos(node);
    DiagnosticsRecord r;
    r.t = series.t[p];
    r.V = series.V[p];
    r.D = series.D[p];
    r.dX = series.dX[p];
    r.phi = series.phi[p];
    r.momentum = series.momentum[p];
    if (series.m > 0 && node >= series.m && series.contains(node - 2L * series.m)) {
        r.L = lyapunov(series, node, params);
    }
    return r;
}

double initial_L0(const InitialDatum& datum, const ModelParams& params, int m) {
    params.validate();
    const double lambda = params.lambda;
    const double tau = params.tau;
    const EnsembleState at0 = datum.state(0.0);
    const double V0 = velocity_fluctuation(at0);
    if (tau == 0.0) {
        return V0;
    }
    const double growth = (2.0 * lambda * tau + 1.0) * std::exp(2.0 * lambda * tau);
    if (datum.constant) {
        const double D0 = weighted_fluctuation(at0, params.kernel);
        return growth * V0 + 2.0 * lambda * lambda * lambda * tau * tau * tau * D0;
    }
    if (m < 2) {
        throw InvalidInputError("L0 quadrature needs m >= 2");
    }
    const double h = tau / m;
    double v_max = 0.0;
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double s = -tau + h * k;
        const EnsembleState st = datum.state(s);
        v_max = std::max(v_max, velocity_fluctuation(st));
        const double weight = (k == m) ? 0.5 : 1.0;
        acc += weight * static_cast<double>(k) * weighted_fluctuation(st, params.kernel);
    }
    const double integral = h * h * acc;
    return growth * v_max + 4.0 * tau * lambda * lambda * lambda * integral;
}

namespace {

double interior_rate_sup(const InitialDatum& datum, const ModelParams& params, int m) {
    double best = 0.0;
    for (int k = 1; k < m; ++k) {
        const double s = -params.tau + params.tau * k / m;
        const EnsembleState st = datum.state(s);
        const double D = weighted_fluctuation(st, params.kernel);
        const double rate = weighted_fluctuation_rate(st, datum.rate(s), params.kernel);
        if (D <= 0.0) {
            if (rate != 0.0) {
                return std::numeric_limits<double>::infinity();
            }
            continue;
        }
        best = std::max(best, std::abs(rate) / D);
    }
    return best;
}

}  // namespace

M0Estimate initial_M0(const InitialDatum& datum, const ModelParams& params, int m) {
    params.validate();
    M0Estimate est;
    const EnsembleState at0 = datum.state(0.0);
    const double D0 = weighted_fluctuation(at0, params.kernel);
    if (!(D0 > 0.0)) {
        return est;
    }
    const EnsembleState delayed = datum.state(-params.tau);
    est.right_limit = std::abs(weighted_fluctuation_derivative(at0, delayed, params)) / D0;
    if (!datum.constant && params.tau > 0.0) {
        const double coarse = interior_rate_sup(datum, params, m);
        const double fine = interior_rate_sup(datum, params, 2 * m);
        est.interior_sup = std::max(coarse, fine);
        const double ref = std::max(std::abs(fine), 1e-300);
        est.low_confidence = !std::isfinite(fine) || std::abs(fine - coarse) > 0.01 * ref;
    }
    est.value = std::max(est.right_limit, est.interior_sup);
    return est;
}

InitialDatumReport analyze_datum(const InitialDatum& datum, const ModelParams& params, int m) {
    InitialDatumReport report;
    const EnsembleState at0 = datum.state(0.0);
    report.V0 = velocity_fluctuation(at0);
    report.D0 = weighted_fluctuation(at0, params.kernel);
    report.L0 = initial_L0(datum, params, m);
    const M0Estimate m0 = initial_M0(datum, params, m);
    report.M0 = m0.value;
    report.M0_low_confidence = m0.low_confidence;
    return report;
}

const char* to_string(FlockingVerdict verdict) {
    switch (verdict) {
        case FlockingVerdict::Flocking: return "Flocking";
        case FlockingVerdict::NotDecided: return "NotDecided";
        case FlockingVerdict::Diverged: return "Diverged";
    }
    return "NotDecided";
}

FlockingVerdict detect_flocking(std::span<const DiagnosticsRecord> series,
                                const FlockingThresholds& thresholds, bool diverged) {
    if (diverged) {
        return FlockingVerdict::Diverged;
    }
    if (series.empty()) {
        return FlockingVerdict::NotDecided;
    }
    double dx_max = 0.0;
    for (const auto& r : series) {
        if (!std::isfinite(r.V) || !std::isfinite(r.D) || !std::isfinite(r.dX)) {
            return FlockingVerdict::Diverged;
        }
        dx_max = std::max(dx_max, r.dX);
    }
    const double spread = std::sqrt(2.0 * series.back().V);
    if (spread < thresholds.v_tol && dx_max < thresholds.dx_cap) {
        return FlockingVerdict::Flocking;
    }
    return FlockingVerdict::NotDecided;
}

int count_sign_changes(std::span<const double> series) {
    int changes = 0;
    int last = 0;
    for (double value : series) {
        const int sign = (value > 0.0) - (value < 0.0);
        if (sign == 0) {
            continue;
        }
        if (last != 0 && sign != last) {
            ++changes;
        }
        last = sign;
    }
    return changes;
}

int count_increase_events(std::span<const double> series, double tolerance) {
    int events = 0;
    bool rising = false;
    for (std::size_t k = 1; k < series.size(); ++k) {
        const bool up = series[k] > series[k - 1] + tolerance;
        if (up && !rising) {
            ++events;
        }
        rising = up;
    }
    return events;
}

OscillationReport detect_oscillation(std::span<const double> series, double tolerance) {
    return {count_sign_changes(series), count_increase_events(series, tolerance)};
}

const InequalityCheck* InequalityLedger::find(const std::string& id) const {
    for (const auto& c : checks) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

bool InequalityLedger::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const InequalityCheck& c) { return !c.applicable || c.passed(); });
}

namespace {

std::string format_param(const char* name, double value) {
    std::string s = std::to_string(value);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') {
        s.pop_back();
    }
    return std::string(name) + "=" + s;
}

void note(InequalityCheck& check, double margin, double t, double slack) {
    ++check.evaluated;
    if (margin < check.worst_margin) {
        check.worst_margin = margin;
        check.worst_time = t;
    }
    if (margin < -slack) {
        ++check.violations;
    }
}

// Relative margin of lhs <= sum(terms).
double relative_margin(double lhs, std::initializer_list<double> terms) {
    double rhs = 0.0;
    double scale = std::abs(lhs);
    for (double term : terms) {
        rhs += term;
        scale += std::abs(term);
    }
    if (scale < 1e-300) {
        return 0.0;
    }
    return (rhs - lhs) / scale;
}

}  // namespace

InequalityLedger check_inequalities(const NodeSeries& series, const ModelParams& params,
                                    const InequalityOptions& options) {
    params.validate();
    const int m = series.m;
    if (m <= 0 || params.tau <= 0.0 || !series.contains(-m) || !series.contains(0)) {
        throw InvalidInputError("inequality checks need a delayed run with its datum nodes");
    }
    const double lambda = params.lambda;
    const double tau = params.tau;
    const double h = series.h;
    const double alpha = params.kernel.alpha();
    const double eps = options.epsilon.value_or(lambda);
    const double sqrt2L0 = std::sqrt(2.0 * options.L0);
    const bool small_delay = lambda * tau <= 0.5;
    const double slack = options.slack;

    InequalityLedger ledger;
    std::vector<InequalityCheck> dv_checks;
    for (double delta : options.deltas) {
        dv_checks.push_back({"dVest(" + format_param("delta", delta) + ")"});
    }
    InequalityCheck est_v1{"estV1"};
    InequalityCheck d_ineq{"D_ineq(" + format_param("eps", eps) + ")"};
    d_ineq.applicable = small_delay;
    InequalityCheck est_phi{"EstPhi"};
    est_phi.applicable = small_delay;
    InequalityCheck lyap{"Lyapunov"};
    lyap.applicable = small_delay;
    InequalityCheck lbound{"Lbound"};
    InequalityCheck d_le_v{"D_le_V"};
    InequalityCheck phiv_le_d{"phiV_le_D"};

    const long last = series.last_index();
    double L_tau = 0.0;
    double L_prev = 0.0;
    if (series.contains(m)) {
        L_tau = lyapunov(series, m, params);
        L_prev = L_tau;
        const double ref = options.L0 > 0.0 ? options.L0 : 1.0;
        note(lbound, (options.L0 - L_tau) / ref, series.t[series.pos(m)], slack);
    }
    const double lyap_scale = L_tau > 0.0 ? L_tau : 1.0;

    for (long k = series.first_index; k <= last; ++k) {
        const std::size_t p = series.pos(k);
        const double t = series.t[p];
        note(d_le_v, relative_margin(series.D[p], {series.V[p]}), t, slack);
        note(phiv_le_d, relative_margin(series.phi[p] * series.V[p], {series.D[p]}), t, slack);
        if (k <= 0) {
            continue;
        }
        const std::size_t pd = series.pos(k - m);
        const double V = series.V[p];
        const double D = series.D[p];
        const double Vdot = series.V_rate[p];
        const double Ddot = series.D_rate[p];
        const double V_del = series.V[pd];
        const double D_del = series.D[pd];

        note(est_v1, relative_margin(Vdot, {2.0 * lambda * V, 2.0 * lambda * V_del}), t, slack);
        note(d_ineq,
             relative_margin(std::abs(Ddot), {(2.0 * eps + 0.5 * alpha * sqrt2L0) * D,
                                              (2.0 * lambda * lambda / eps) * D_del}),
             t, slack);

        if (k <= m) {
            continue;
        }
        // t > tau: int_{t-tau}^t D(s - tau) ds over nodes k-2m .. k-m.
        const std::size_t p0 = series.pos(k - 2L * m);
        double integral = 0.5 * (series.D[p0] + series.D[pd]);
        for (std::size_t q = p0 + 1; q < pd; ++q) {
            integral += series.D[q];
        }
        integral *= h;
        for (std::size_t i = 0; i < options.deltas.size(); ++i) {
            const double delta = options.deltas[i];
            note(dv_checks[i],
                 relative_margin(Vdot, {2.0 * (delta - 1.0) * lambda * D_del,
                                        (2.0 * tau * lambda * lambda * lambda / delta) * integral}),
                 t, slack);
        }
        const double bound = params.kernel(options.dX0 + sqrt2L0 * t);
        note(est_phi, relative_margin(bound, {series.phi[p]}), t, slack);

        const double L = lyapunov(series, k, params);
        note(lyap, (L_prev - L) / lyap_scale, t, slack);
        L_prev = L;
    }

    for (auto& c : dv_checks) {
        ledger.checks.push_back(std::move(c));
    }
    for (auto* c : {&est_v1, &d_ineq, &est_phi, &lyap, &lbound, &d_le_v, &phiv_le_d}) {
        ledger.checks.push_back(std::move(*c));
    }
    return ledger;
}

}  // namespace csdelay
