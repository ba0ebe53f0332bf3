#pragma once

// Functionals of the flocking analysis and pointwise checkers for the
// inequalities they satisfy along solutions.
//
// Double sums run over all ordered pairs with a 1/2 prefactor, so for N = 2
// V = |v_1 - v_2|^2.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdelay/cs_model.hpp"
#include "csdelay/dde_engine.hpp"

namespace csdelay {

/// V = 1/2 sum_ij |v_i - v_j|^2
double velocity_fluctuation(const EnsembleState& state);
/// D = 1/2 sum_ij psi(|x_i - x_j|) |v_i - v_j|^2
double weighted_fluctuation(const EnsembleState& state, const Kernel& kernel);

/// dV/dt given the ensemble and its time derivative.
double velocity_fluctuation_rate(const EnsembleState& state, const EnsembleState& rate);
/// dD/dt by the chain rule given the ensemble and its time derivative. Pairs
/// closer than 1e-14 drop the psi' term (unit vector undefined, psi'(0) = 0).
double weighted_fluctuation_rate(const EnsembleState& state, const EnsembleState& rate,
                                 const Kernel& kernel);
/// dD/dt along the dynamics, velocity derivative from cs_rhs.
double weighted_fluctuation_derivative(const EnsembleState& state, const EnsembleState& delayed,
                                       const ModelParams& params);

double position_diameter(const EnsembleState& state);
/// min_ij psi(|x_i - x_j|) = psi(d_X) for nonincreasing psi.
double min_interaction(const EnsembleState& state, const Kernel& kernel);
Vector momentum(const EnsembleState& state);

struct DiagnosticsRecord {
    double t = 0.0;
    double V = 0.0;
    double D = 0.0;
    double dX = 0.0;
    double phi = 1.0;
    std::optional<double> L;  ///< defined for t >= tau
    Vector momentum;
};

/// Per-node scalar record of a run, nodes first_index .. first_index + size - 1.
/// Datum nodes (t < 0) carry the datum's rates; node 0 and later the RHS.
struct NodeSeries {
    double tau = 0.0;
    int m = 0;  ///< nodes per delay; 0 for undelayed runs
    double h = 0.0;
    long first_index = 0;
    std::vector<double> t, V, D, V_rate, D_rate, dX, phi;
    std::vector<Vector> momentum;

    [[nodiscard]] std::size_t size() const { return t.size(); }
    [[nodiscard]] long last_index() const { return first_index + static_cast<long>(size()) - 1; }
    [[nodiscard]] bool contains(long k) const { return k >= first_index && k <= last_index(); }
    [[nodiscard]] std::size_t pos(long k) const { return static_cast<std::size_t>(k - first_index); }
    /// Entries at nodes >= 0.
    [[nodiscard]] std::size_t origin_pos() const { return pos(0); }
};

/// Builds a NodeSeries from the datum and an integration observer.
class SeriesRecorder {
public:
    SeriesRecorder(ModelParams params, std::size_t agents, std::size_t dim, int m, double h);

    /// Records datum nodes -m .. -1; call before integrating.
    void record_datum(const InitialDatum& datum);
    void record(double t, const EnsembleState& state, const EnsembleState& rate);
    [[nodiscard]] Observer observer();

    [[nodiscard]] const NodeSeries& series() const { return series_; }
    [[nodiscard]] NodeSeries take() { return std::move(series_); }

private:
    ModelParams params_;
    std::size_t n_;
    std::size_t d_;
    NodeSeries series_;
};

/// L(t) = V(t) + 4 tau lambda^3 int_{t-tau}^t (s - t + tau) D(s - tau) ds, trapezoid
/// on the node grid. `delayed_window` holds D at t - 2 tau, ..., t - tau (m + 1 values).
double lyapunov(double V_now, std::span<const double> delayed_window, double tau, double lambda);
/// L at node k of a recorded run; needs nodes k - 2m .. k.
double lyapunov(const NodeSeries& series, long node, const ModelParams& params);

DiagnosticsRecord make_record(const NodeSeries& series, long node, const ModelParams& params);

struct M0Estimate {
    std::optional<double> value;  ///< undefined when D(0) = 0
    double right_limit = 0.0;     ///< |D'(0+)| / D(0)
    double interior_sup = 0.0;    ///< grid max of |D'(s)| / D(s) on (-tau, 0)
    bool low_confidence = false;  ///< grid refinement moved the sup by > 1%
};

struct InitialDatumReport {
    double L0 = 0.0;
    std::optional<double> M0;
    double V0 = 0.0;
    double D0 = 0.0;
    bool M0_low_confidence = false;
};

double initial_L0(const InitialDatum& datum, const ModelParams& params, int m = 64);
M0Estimate initial_M0(const InitialDatum& datum, const ModelParams& params, int m = 64);
InitialDatumReport analyze_datum(const InitialDatum& datum, const ModelParams& params, int m = 64);

enum class FlockingVerdict { Flocking, NotDecided, Diverged };
const char* to_string(FlockingVerdict verdict);

struct FlockingThresholds {
    double v_tol = 1e-6;  ///< on sqrt(2 V), the max pairwise velocity difference bound
    double dx_cap = 1e6;
};

FlockingVerdict detect_flocking(std::span<const DiagnosticsRecord> series,
                                const FlockingThresholds& thresholds = {}, bool diverged = false);

/// Strict sign changes, zeros skipped.
int count_sign_changes(std::span<const double> series);
/// Number of increasing runs: indices where the series rises by more than
/// `tolerance` after not rising.
int count_increase_events(std::span<const double> series, double tolerance = 0.0);

struct OscillationReport {
    int sign_changes = 0;
    int increase_events = 0;
};
OscillationReport detect_oscillation(std::span<const double> series, double tolerance = 0.0);

struct InequalityCheck {
    std::string id;
    bool applicable = true;  ///< false when the hypothesis (lambda tau <= 1/2) fails
    long evaluated = 0;
    long violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_time = 0.0;

    [[nodiscard]] bool passed() const { return violations == 0; }
};

struct InequalityOptions {
    double L0 = 0.0;
    double dX0 = 0.0;
    std::vector<double> deltas{0.5, 1.0};
    std::optional<double> epsilon;  ///< defaults to lambda
    double slack = 1e-8;
};

struct InequalityLedger {
    std::vector<InequalityCheck> checks;

    [[nodiscard]] const InequalityCheck* find(const std::string& id) const;
    /// All applicable checks passed.
    [[nodiscard]] bool all_passed() const;
};

InequalityLedger check_inequalities(const NodeSeries& series, const ModelParams& params,
                                    const InequalityOptions& options);

}  // namespace csdelay
