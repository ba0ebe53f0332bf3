#pragma once

// Delayed Cucker-Smale ensemble:
//
//     x_i' = v_i
//     v_i' = (lambda / N) sum_j psi(|x~_i - x~_j|) (v~_j - v~_i)
//
// where ~ marks values at t - tau.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csdelay/dde_engine.hpp"

namespace csdelay {

/// Positions and velocities of N agents in R^d, stored row-major (agent, component).
struct EnsembleState {
    std::size_t n = 0;
    std::size_t d = 0;
    Vector x;
    Vector v;

    EnsembleState() = default;
    EnsembleState(std::size_t agents, std::size_t dim);
    EnsembleState(std::size_t agents, std::size_t dim, Vector positions, Vector velocities);

    [[nodiscard]] std::span<const double> position(std::size_t i) const { return {x.data() + i * d, d}; }
    [[nodiscard]] std::span<const double> velocity(std::size_t i) const { return {v.data() + i * d, d}; }
    [[nodiscard]] std::size_t flat_size() const { return 2 * n * d; }
    [[nodiscard]] bool finite() const;

    /// [x..., v...]
    [[nodiscard]] Vector pack() const;
    void pack_into(std::span<double> out) const;
    static EnsembleState unpack(std::span<const double> flat, std::size_t agents, std::size_t dim);
    void assign(std::span<const double> flat);
};

enum class KernelKind { CuckerSmale, Constant };

/// Constants (gamma, c, R) of the tail bound psi(r) >= c r^(gamma - 1) for r >= R.
struct TailConstants {
    double gamma = 0.5;
    double c = 0.5;
    double R = 1.0;
};

/// Communication rate psi.
class Kernel {
public:
    /// psi(r) = (1 + r^2)^(-beta), beta >= 0.
    static Kernel cucker_smale(double beta);
    /// psi(r) = value, value in (0, 1].
    static Kernel constant(double value = 1.0);

    [[nodiscard]] KernelKind kind() const { return kind_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] double value() const { return value_; }
    /// Log-Lipschitz constant: psi' >= -alpha psi. 2 beta for Cucker-Smale, 0 for constant.
    [[nodiscard]] double alpha() const { return kind_ == KernelKind::CuckerSmale ? 2.0 * beta_ : 0.0; }

    [[nodiscard]] double operator()(double r) const;
    [[nodiscard]] double derivative(double r) const;

    /// Rate from a squared distance; skips the sqrt on the hot path.
    [[nodiscard]] double from_squared(double r2) const;

    [[nodiscard]] std::string describe() const;

private:
    Kernel(KernelKind kind, double beta, double value) : kind_(kind), beta_(beta), value_(value) {}

    KernelKind kind_;
    double beta_;
    double value_;
};

double kernel_eval(const Kernel& kernel, double r);
double kernel_derivative(const Kernel& kernel, double r);

struct AssumptionCheck {
    bool passed = true;
    double worst_margin = 0.0;  ///< min over the grid of the assumption's slack
    double worst_radius = 0.0;
    std::string note;
};

struct KernelValidation {
    AssumptionCheck bounded;        ///< 0 < psi(r) <= 1
    AssumptionCheck monotone;       ///< psi nonincreasing on the sorted grid
    AssumptionCheck tail;           ///< psi(r) r^(1 - gamma) >= c for r >= R
    AssumptionCheck log_lipschitz;  ///< psi'(r) + alpha psi(r) >= 0

    [[nodiscard]] bool all_passed() const {
        return bounded.passed && monotone.passed && tail.passed && log_lipschitz.passed;
    }
};

KernelValidation validate_kernel(const Kernel& kernel, std::span<const double> grid,
                                 const TailConstants& tail = {});

struct ModelParams {
    double lambda = 1.0;
    double tau = 0.0;
    Kernel kernel = Kernel::constant(1.0);

    void validate() const;
};

/// Derivative of the ensemble given current and delayed states.
void cs_rhs(const EnsembleState& state, const EnsembleState& delayed, const ModelParams& params,
            EnsembleState& out);
EnsembleState cs_rhs(double t, const EnsembleState& state, const EnsembleState& delayed,
                     const ModelParams& params);

/// Adapter for dde_engine over the packed layout. Keeps scratch buffers; one per run.
DelayRhs make_delay_rhs(const ModelParams& params, std::size_t agents, std::size_t dim);

/// Initial trajectory on [-tau, 0].
struct InitialDatum {
    std::size_t n = 0;
    std::size_t d = 0;
    bool constant = true;
    std::function<EnsembleState(double s)> state;
    std::function<EnsembleState(double s)> rate;  ///< time derivative of the datum

    [[nodiscard]] EnsembleState at(double s) const { return state(s); }
};

InitialDatum constant_datum(EnsembleState state);

/// v_i(s) = v_i + s a_i,  x_i(s) = x_i + s v_i + s^2 a_i / 2.
InitialDatum linear_ramp_datum(EnsembleState at_zero, Vector acceleration);

/// Positions uniform in [0, box]^d, velocities uniform in [-spread, spread]^d with the mean removed.
EnsembleState random_cloud(std::size_t agents, std::size_t dim, double box, double spread,
                           std::uint64_t seed);

HistoryBuffer make_history(const InitialDatum& datum, double tau, int m, bool retain_full = false);

}  // namespace csdelay
