#pragma once

// Fixed-step method-of-steps integrator for constant-lag delay systems
//
//     y'(t) = f(t, y(t), y(t - tau)),   y = datum on [-tau, 0].
//
// The step is h = tau / m, so every full-step delayed argument lands on a
// stored node. Half-stage arguments are served by cubic Hermite
// interpolation on (state, derivative) pairs.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace csdelay {

using Vector = std::vector<double>;

/// Writes y'(t) into `out` given the current state and the state at t - tau.
using DelayRhs = std::function<void(double t, std::span<const double> state,
                                    std::span<const double> delayed, std::span<double> out)>;

using Trajectory = std::function<Vector(double s)>;

struct StepperConfig {
    double tau = 1.0;
    int m = 20;  ///< substeps per delay interval, >= 2
    double t_end = 1.0;
    std::size_t state_dim = 0;
    bool retain_full = false;

    [[nodiscard]] double step() const { return tau / m; }
    /// Number of steps; t_end is rounded up to the node grid.
    [[nodiscard]] long steps() const;
    void validate() const;
};

/// Dense record of (state, derivative) at the nodes t_k = k * tau / m.
///
/// Only [t_last - tau - h, t_last] is retained unless full retention is
/// requested. Node 0 additionally keeps the datum's left derivative, since
/// the derivative generally jumps there.
class HistoryBuffer {
public:
    HistoryBuffer(double tau, int m, std::size_t dim, bool retain_full = false);

    [[nodiscard]] double tau() const { return tau_; }
    [[nodiscard]] int nodes_per_delay() const { return m_; }
    [[nodiscard]] double step() const { return tau_ / m_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] bool retains_full() const { return retain_full_; }
    void set_retain_full(bool on) { retain_full_ = on; }

    [[nodiscard]] bool empty() const { return count_ == 0; }
    [[nodiscard]] long first_index() const { return first_; }
    [[nodiscard]] long last_index() const { return first_ + static_cast<long>(count_) - 1; }
    [[nodiscard]] double time_at(long k) const { return tau_ * static_cast<double>(k) / m_; }
    [[nodiscard]] double time_now() const { return time_at(last_index()); }
    [[nodiscard]] bool contains(long k) const { return k >= first_ && k <= last_index(); }

    [[nodiscard]] std::span<const double> state(long k) const;
    /// Right derivative at node k (the RHS value for k >= 0).
    [[nodiscard]] std::span<const double> derivative(long k) const;
    /// Left derivative at node k; differs from derivative() only at k = 0.
    [[nodiscard]] std::span<const double> left_derivative(long k) const;

    /// Appends node last_index() + 1 (or node `start` for an empty buffer).
    void push(std::span<const double> state, std::span<const double> derivative);
    void start_at(long index);
    /// Replaces the right derivative at node 0, keeping the old one as left derivative.
    void set_origin_derivative(std::span<const double> right_derivative);

    /// State at an arbitrary time inside the window.
    [[nodiscard]] Vector lookup(double t) const;
    /// Hermite value at t_k + h/2.
    void midpoint(long k, std::span<double> out) const;
    /// Hermite value at t_k + theta*h, theta in [0, 1].
    void interpolate(long k, double theta, std::span<double> out) const;

private:
    void trim();

    double tau_;
    int m_;
    std::size_t dim_;
    bool retain_full_;
    long first_ = 0;
    std::size_t count_ = 0;
    long array_first_ = 0;  // node index stored at the front of the flat arrays
    Vector states_;
    Vector derivs_;
    Vector origin_left_;
};

/// Populates nodes -tau, ..., 0 from the trajectory, with finite-difference
/// derivatives (central inside, one-sided second order at the ends).
HistoryBuffer init_history(const Trajectory& trajectory, double tau, int m, bool retain_full = false);
/// Same, with exact derivatives.
HistoryBuffer init_history(const Trajectory& trajectory, const Trajectory& derivative, double tau,
                           int m, bool retain_full = false);

struct NodeView {
    long index;
    double t;
    std::span<const double> state;
    std::span<const double> derivative;
    const HistoryBuffer* history;  ///< null for undelayed runs
};

using Observer = std::function<void(const NodeView&)>;

enum class IntegrationStatus { Completed, Diverged };

struct IntegrationResult {
    HistoryBuffer history;
    IntegrationStatus status = IntegrationStatus::Completed;
    double blowup_time = 0.0;  ///< first node time with a non-finite state
    long steps_taken = 0;
};

/// Classical RK4 with delayed stage arguments from the history.
/// Observers see node 0 (after its RHS is evaluated) and every accepted node.
IntegrationResult integrate(const DelayRhs& rhs, HistoryBuffer history, const StepperConfig& config,
                            std::span<const Observer> observers = {});

/// Undelayed RK4 (delayed argument aliased to the current state).
struct OdeResult {
    Vector state;
    IntegrationStatus status = IntegrationStatus::Completed;
    double blowup_time = 0.0;
    long steps_taken = 0;
};
OdeResult integrate_instantaneous(const DelayRhs& rhs, Vector initial, double h, double t_end,
                                  std::span<const Observer> observers = {});

}  // namespace csdelay
