#include "csdelay/dde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csdelay/errors.hpp"

namespace csdelay {

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_window_params(double tau, int m) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidInputError("delay tau must be finite and > 0, got " + std::to_string(tau));
    }
    if (m < 2) {
        throw InvalidInputError("nodes per delay m must be >= 2, got " + std::to_string(m));
    }
}

}  // namespace

long StepperConfig::steps() const {
    const double n = std::ceil(t_end / step() - 1e-9);
    return std::max(0L, static_cast<long>(n));
}

void StepperConfig::validate() const {
    check_window_params(tau, m);
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw InvalidInputError("t_end must be finite and > 0");
    }
    if (state_dim == 0) {
        throw InvalidInputError("state_dim must be positive");
    }
}

HistoryBuffer::HistoryBuffer(double tau, int m, std::size_t dim, bool retain_full)
    : tau_(tau), m_(m), dim_(dim), retain_full_(retain_full) {
    check_window_params(tau, m);
    if (dim == 0) {
        throw InvalidInputError("history dimension must be positive");
    }
}

void HistoryBuffer::start_at(long index) {
    if (!empty()) {
        throw InvalidInputError("start_at on a non-empty history");
    }
    first_ = index;
    array_first_ = index;
}

std::span<const double> HistoryBuffer::state(long k) const {
    if (!contains(k)) {
        throw OutOfWindowError("node " + std::to_string(k) + " outside history window");
    }
    const auto pos = static_cast<std::size_t>(k - array_first_) * dim_;
    return {states_.data() + pos, dim_};
}

std::span<const double> HistoryBuffer::derivative(long k) const {
    if (!contains(k)) {
        throw OutOfWindowError("node " + std::to_string(k) + " outside history window");
    }
    const auto pos = static_cast<std::size_t>(k - array_first_) * dim_;
    return {derivs_.data() + pos, dim_};
}

std::span<const double> HistoryBuffer::left_derivative(long k) const {
    if (k == 0 && !origin_left_.empty()) {
        return origin_left_;
    }
    return derivative(k);
}

void HistoryBuffer::push(std::span<const double> state, std::span<const double> derivative) {
    if (state.size() != dim_ || derivative.size() != dim_) {
        throw InvalidInputError("history push with wrong dimension");
    }
    states_.insert(states_.end(), state.begin(), state.end());
    derivs_.insert(derivs_.end(), derivative.begin(), derivative.end());
    ++count_;
    trim();
}

void HistoryBuffer::set_origin_derivative(std::span<const double> right_derivative) {
    if (!contains(0) || right_derivative.size() != dim_) {
        throw InvalidInputError("origin derivative needs node 0 and matching dimension");
    }
    const auto old = derivative(0);
    origin_left_.assign(old.begin(), old.end());
    const auto pos = static_cast<std::size_t>(0 - array_first_) * dim_;
    std::copy(right_derivative.begin(), right_derivative.end(), derivs_.begin() + static_cast<long>(pos));
}

void HistoryBuffer::trim() {
    if (retain_full_) {
        return;
    }
    const long keep_from = last_index() - m_ - 1;
    if (keep_from <= first_) {
        return;
    }
    count_ -= static_cast<std::size_t>(keep_from - first_);
    first_ = keep_from;
    // Compact once the dead prefix is as large as the live window.
    const long dead = first_ - array_first_;
    if (dead > static_cast<long>(count_) + 16) {
        const auto cut = static_cast<long>(static_cast<std::size_t>(dead) * dim_);
        states_.erase(states_.begin(), states_.begin() + cut);
        derivs_.erase(derivs_.begin(), derivs_.begin() + cut);
        array_first_ = first_;
    }
}

void HistoryBuffer::interpolate(long k, double theta, std::span<double> out) const {
    const auto y0 = state(k);
    const auto y1 = state(k + 1);
    const auto f0 = derivative(k);
    const auto f1 = left_derivative(k + 1);
    const double h = step();
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + theta;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    for (std::size_t i = 0; i < dim_; ++i) {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

void HistoryBuffer::midpoint(long k, std::span<double> out) const {
    const auto y0 = state(k);
    const auto y1 = state(k + 1);
    const auto f0 = derivative(k);
    const auto f1 = left_derivative(k + 1);
    const double h8 = step() / 8.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        out[i] = 0.5 * (y0[i] + y1[i]) + h8 * (f0[i] - f1[i]);
    }
}

Vector HistoryBuffer::lookup(double t) const {
    if (empty() || !std::isfinite(t)) {
        throw OutOfWindowError("lookup on empty history or non-finite time");
    }
    const double pos = t * m_ / tau_;
    const double nearest = std::round(pos);
    const auto k = static_cast<long>(nearest);
    if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, std::abs(pos)) && contains(k)) {
        const auto s = state(k);
        return {s.begin(), s.end()};
    }
    const auto lo = static_cast<long>(std::floor(pos));
    if (!contains(lo) || !contains(lo + 1)) {
        throw OutOfWindowError("lookup time " + std::to_string(t) + " outside [" +
                               std::to_string(time_at(first_)) + ", " +
                               std::to_string(time_now()) + "]");
    }
    Vector out(dim_);
    interpolate(lo, pos - static_cast<double>(lo), out);
    return out;
}

namespace {

HistoryBuffer build_history(const Trajectory& trajectory, const Trajectory* derivative, double tau,
                            int m, bool retain_full) {
    check_window_params(tau, m);
    std::vector<Vector> nodes;
    nodes.reserve(static_cast<std::size_t>(m) + 1);
    for (long k = -m; k <= 0; ++k) {
        const double s = tau * static_cast<double>(k) / m;
        nodes.push_back(trajectory(s));
        if (nodes.back().empty() || nodes.back().size() != nodes.front().size()) {
            throw InvalidInputError("initial trajectory returned inconsistent dimensions");
        }
        if (!all_finite(nodes.back())) {
            throw InvalidInputError("initial trajectory is not finite at s = " + std::to_string(s));
        }
    }
    const std::size_t dim = nodes.front().size();
    HistoryBuffer history(tau, m, dim, retain_full);
    history.start_at(-m);
    const double h = tau / m;
    Vector slope(dim);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (derivative != nullptr) {
            const double s = tau * (static_cast<double>(j) - m) / m;
            slope = (*derivative)(s);
            if (slope.size() != dim || !all_finite(slope)) {
                throw InvalidInputError("initial derivative invalid at s = " + std::to_string(s));
            }
        } else if (j == 0) {
            for (std::size_t i = 0; i < dim; ++i) {
                slope[i] = (-3.0 * nodes[0][i] + 4.0 * nodes[1][i] - nodes[2][i]) / (2.0 * h);
            }
        } else if (j + 1 == nodes.size()) {
            for (std::size_t i = 0; i < dim; ++i) {
                slope[i] = (3.0 * nodes[j][i] - 4.0 * nodes[j - 1][i] + nodes[j - 2][i]) / (2.0 * h);
            }
        } else {
            for (std::size_t i = 0; i < dim; ++i) {
                slope[i] = (nodes[j + 1][i] - nodes[j - 1][i]) / (2.0 * h);
            }
        }
        history.push(nodes[j], slope);
    }
    return history;
}

}  // namespace

HistoryBuffer init_history(const Trajectory& trajectory, double tau, int m, bool retain_full) {
    return build_history(trajectory, nullptr, tau, m, retain_full);
}

HistoryBuffer init_history(const Trajectory& trajectory, const Trajectory& derivative, double tau,
                           int m, bool retain_full) {
    return build_history(trajectory, &derivative, tau, m, retain_full);
}

IntegrationResult integrate(const DelayRhs& rhs, HistoryBuffer history, const StepperConfig& config,
                            std::span<const Observer> observers) {
    config.validate();
    if (history.dim() != config.state_dim) {
        throw InvalidInputError("history dimension does not match state_dim");
    }
    if (std::abs(history.tau() - config.tau) > 1e-15 * config.tau ||
        history.nodes_per_delay() != config.m) {
        throw InvalidInputError("history grid does not match stepper config");
    }
    const int m = config.m;
    const long start = history.last_index();
    if (history.empty() || start < 0 || !history.contains(start - m)) {
        throw InvalidInputError("history must span at least [t_now - tau, t_now] with t_now >= 0");
    }
    if (config.retain_full) {
        history.set_retain_full(true);
    }

    const std::size_t dim = config.state_dim;
    const double h = config.step();
    Vector y(dim), k1(dim), k2(dim), k3(dim), k4(dim), stage(dim), delayed(dim), next(dim), slope(dim);

    IntegrationResult result{std::move(history)};
    HistoryBuffer& hist = result.history;

    auto notify = [&](long n) {
        const NodeView view{n, hist.time_at(n), hist.state(n), hist.derivative(n), &hist};
        for (const auto& obs : observers) {
            obs(view);
        }
    };

    if (start == 0) {
        const auto y0 = hist.state(0);
        rhs(0.0, y0, hist.state(-m), k1);
        if (!all_finite(k1)) {
            result.status = IntegrationStatus::Diverged;
            return result;
        }
        hist.set_origin_derivative(k1);
    }
    notify(start);

    const long total = config.steps();
    for (long n = start; n < total; ++n) {
        const double t = hist.time_at(n);
        const auto yn = hist.state(n);
        std::copy(yn.begin(), yn.end(), y.begin());
        const auto fn = hist.derivative(n);
        std::copy(fn.begin(), fn.end(), k1.begin());

        hist.midpoint(n - m, delayed);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, stage, delayed, k2);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, stage, delayed, k3);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + h * k3[i];
        rhs(t + h, stage, hist.state(n + 1 - m), k4);
        for (std::size_t i = 0; i < dim; ++i) {
            next[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        const double t_next = hist.time_at(n + 1);
        if (all_finite(next)) {
            rhs(t_next, next, hist.state(n + 1 - m), slope);
        }
        if (!all_finite(next) || !all_finite(slope)) {
            result.status = IntegrationStatus::Diverged;
            result.blowup_time = t_next;
            return result;
        }
        hist.push(next, slope);
        ++result.steps_taken;
        notify(n + 1);
    }
    return result;
}

OdeResult integrate_instantaneous(const DelayRhs& rhs, Vector initial, double h, double t_end,
                                  std::span<const Observer> observers) {
    if (!(h > 0.0) || !(t_end > 0.0) || initial.empty()) {
        throw InvalidInputError("undelayed integration needs h > 0, t_end > 0 and a state");
    }
    if (!all_finite(initial)) {
        throw InvalidInputError("initial state is not finite");
    }
    const std::size_t dim = initial.size();
    const auto total = static_cast<long>(std::ceil(t_end / h - 1e-9));
    OdeResult result{std::move(initial)};
    Vector& y = result.state;
    Vector k1(dim), k2(dim), k3(dim), k4(dim), stage(dim);

    auto notify = [&](long n, double t) {
        const NodeView view{n, t, y, k1, nullptr};
        for (const auto& obs : observers) {
            obs(view);
        }
    };

    rhs(0.0, y, y, k1);
    notify(0, 0.0);
    for (long n = 0; n < total; ++n) {
        const double t = h * static_cast<double>(n);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, stage, stage, k2);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, stage, stage, k3);
        for (std::size_t i = 0; i < dim; ++i) stage[i] = y[i] + h * k3[i];
        rhs(t + h, stage, stage, k4);
        for (std::size_t i = 0; i < dim; ++i) {
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        const double t_next = h * static_cast<double>(n + 1);
        if (all_finite(y)) {
            rhs(t_next, y, y, k1);
        }
        if (!all_finite(y) || !all_finite(k1)) {
            result.status = IntegrationStatus::Diverged;
            result.blowup_time = t_next;
            return result;
        }
        ++result.steps_taken;
        notify(n + 1, t_next);
    }
    return result;
}

}  // namespace csdelay
