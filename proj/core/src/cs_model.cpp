#include "csdelay/cs_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "csdelay/errors.hpp"

namespace csdelay {

EnsembleState::EnsembleState(std::size_t agents, std::size_t dim)
    : n(agents), d(dim), x(agents * dim, 0.0), v(agents * dim, 0.0) {}

EnsembleState::EnsembleState(std::size_t agents, std::size_t dim, Vector positions, Vector velocities)
    : n(agents), d(dim), x(std::move(positions)), v(std::move(velocities)) {
    if (x.size() != n * d || v.size() != n * d) {
        throw InvalidInputError("ensemble arrays must have N*d entries");
    }
}

bool EnsembleState::finite() const {
    auto ok = [](double a) { return std::isfinite(a); };
    return std::all_of(x.begin(), x.end(), ok) && std::all_of(v.begin(), v.end(), ok);
}

Vector EnsembleState::pack() const {
    Vector out(flat_size());
    pack_into(out);
    return out;
}

void EnsembleState::pack_into(std::span<double> out) const {
    std::copy(x.begin(), x.end(), out.begin());
    std::copy(v.begin(), v.end(), out.begin() + static_cast<long>(x.size()));
}

EnsembleState EnsembleState::unpack(std::span<const double> flat, std::size_t agents, std::size_t dim) {
    EnsembleState s(agents, dim);
    s.assign(flat);
    return s;
}

void EnsembleState::assign(std::span<const double> flat) {
    if (flat.size() != flat_size()) {
        throw InvalidInputError("packed state has wrong size");
    }
    const auto half = static_cast<long>(n * d);
    std::copy(flat.begin(), flat.begin() + half, x.begin());
    std::copy(flat.begin() + half, flat.end(), v.begin());
}

Kernel Kernel::cucker_smale(double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw InvalidInputError("Cucker-Smale exponent beta must be finite and >= 0");
    }
    return {KernelKind::CuckerSmale, beta, 1.0};
}

Kernel Kernel::constant(double value) {
    if (!(value > 0.0 && value <= 1.0)) {
        throw InvalidInputError("constant kernel value must lie in (0, 1]");
    }
    return {KernelKind::Constant, 0.0, value};
}

double Kernel::from_squared(double r2) const {
    if (kind_ == KernelKind::Constant) {
        return value_;
    }
    if (beta_ == 0.5) {
        return 1.0 / std::sqrt(1.0 + r2);
    }
    return std::pow(1.0 + r2, -beta_);
}

double Kernel::operator()(double r) const {
    if (!(r >= 0.0)) {
        throw InvalidInputError("kernel distance must be >= 0");
    }
    return from_squared(r * r);
}

double Kernel::derivative(double r) const {
    if (!(r >= 0.0)) {
        throw InvalidInputError("kernel distance must be >= 0");
    }
    if (kind_ == KernelKind::Constant) {
        return 0.0;
    }
    return -2.0 * beta_ * r * std::pow(1.0 + r * r, -beta_ - 1.0);
}

std::string Kernel::describe() const {
    std::ostringstream os;
    if (kind_ == KernelKind::Constant) {
        os << "constant(" << value_ << ")";
    } else {
        os << "cucker_smale(beta=" << beta_ << ")";
    }
    return os.str();
}

double kernel_eval(const Kernel& kernel, double r) { return kernel(r); }

double kernel_derivative(const Kernel& kernel, double r) { return kernel.derivative(r); }

KernelValidation validate_kernel(const Kernel& kernel, std::span<const double> grid,
                                 const TailConstants& tail) {
    if (grid.empty()) {
        throw InvalidInputError("kernel validation grid is empty");
    }
    std::vector<double> radii(grid.begin(), grid.end());
    for (double r : radii) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw InvalidInputError("kernel validation radii must be finite and >= 0");
        }
    }
    if (!(tail.gamma > 0.0 && tail.gamma < 1.0) || !(tail.c > 0.0) || !(tail.R > 0.0)) {
        throw InvalidInputError("tail constants need 0 < gamma < 1, c > 0, R > 0");
    }
    std::sort(radii.begin(), radii.end());

    KernelValidation report;
    report.bounded.worst_margin = std::numeric_limits<double>::infinity();
    report.monotone.worst_margin = std::numeric_limits<double>::infinity();
    report.tail.worst_margin = std::numeric_limits<double>::infinity();
    report.log_lipschitz.worst_margin = std::numeric_limits<double>::infinity();

    auto record = [](AssumptionCheck& check, double margin, double r) {
        if (margin < check.worst_margin) {
            check.worst_margin = margin;
            check.worst_radius = r;
        }
        if (margin < 0.0) {
            check.passed = false;
        }
    };

    const double alpha = kernel.alpha();
    double previous = std::numeric_limits<double>::infinity();
    bool any_tail = false;
    for (double r : radii) {
        const double psi = kernel(r);
        // psi in (0, 1]: margin is the distance to the nearer violated edge.
        record(report.bounded, psi > 0.0 ? 1.0 - psi : -1.0, r);
        record(report.monotone, previous - psi, r);
        previous = psi;
        if (r > 0.0) {
            record(report.log_lipschitz, kernel.derivative(r) + alpha * psi, r);
        }
        if (r >= tail.R) {
            any_tail = true;
            record(report.tail, psi * std::pow(r, 1.0 - tail.gamma) - tail.c, r);
        }
    }
    if (!any_tail) {
        report.tail.worst_margin = 0.0;
        report.tail.note = "no grid radius >= R; tail bound not exercised";
    }
    if (std::isinf(report.monotone.worst_margin)) {
        report.monotone.worst_margin = 0.0;
    }
    if (std::isinf(report.log_lipschitz.worst_margin)) {
        report.log_lipschitz.worst_margin = 0.0;
    }
    if (kernel.kind() == KernelKind::CuckerSmale && kernel.beta() >= 0.5) {
        report.tail.note = "beta >= 1/2: psi decays like r^(-2 beta), no tail bound with gamma > 0 holds";
    }
    return report;
}

void ModelParams::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidInputError("coupling lambda must be finite and > 0");
    }
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw InvalidInputError("delay tau must be finite and >= 0");
    }
}

namespace {

// Velocity part of the RHS over the packed layout. Pairs are visited once
// (i < j) in a fixed order, so the reduction is deterministic and the
// contributions cancel exactly in the momentum sum.
void alignment_force(std::span<const double> delayed_x, std::span<const double> delayed_v,
                     std::size_t n, std::size_t d, const ModelParams& params, std::span<double> dv) {
    std::fill(dv.begin(), dv.end(), 0.0);
    const Kernel& kernel = params.kernel;
    const bool constant = kernel.kind() == KernelKind::Constant;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = delayed_x.data() + i * d;
        const double* vi = delayed_v.data() + i * d;
        double* ai = dv.data() + i * d;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* xj = delayed_x.data() + j * d;
            const double* vj = delayed_v.data() + j * d;
            double w;
            if (constant) {
                w = kernel.value();
            } else {
                double r2 = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double dx = xi[k] - xj[k];
                    r2 += dx * dx;
                }
                w = kernel.from_squared(r2);
            }
            double* aj = dv.data() + j * d;
            for (std::size_t k = 0; k < d; ++k) {
                const double f = w * (vj[k] - vi[k]);
                ai[k] += f;
                aj[k] -= f;
            }
        }
    }
    const double scale = params.lambda / static_cast<double>(n);
    for (double& a : dv) {
        a *= scale;
    }
}

}  // namespace

void cs_rhs(const EnsembleState& state, const EnsembleState& delayed, const ModelParams& params,
            EnsembleState& out) {
    if (state.n != delayed.n || state.d != delayed.d || state.x.size() != state.n * state.d ||
        delayed.x.size() != delayed.n * delayed.d) {
        throw InvalidInputError("current and delayed ensembles differ in shape");
    }
    if (out.n != state.n || out.d != state.d) {
        out = EnsembleState(state.n, state.d);
    }
    out.x = state.v;
    alignment_force(delayed.x, delayed.v, state.n, state.d, params, out.v);
}

EnsembleState cs_rhs(double /*t*/, const EnsembleState& state, const EnsembleState& delayed,
                     const ModelParams& params) {
    EnsembleState out(state.n, state.d);
    cs_rhs(state, delayed, params, out);
    return out;
}

DelayRhs make_delay_rhs(const ModelParams& params, std::size_t agents, std::size_t dim) {
    params.validate();
    const std::size_t half = agents * dim;
    return [params, agents, dim, half](double, std::span<const double> state,
                                       std::span<const double> delayed, std::span<double> out) {
        if (state.size() != 2 * half || delayed.size() != 2 * half || out.size() != 2 * half) {
            throw InvalidInputError("packed ensemble has wrong size");
        }
        std::copy(state.begin() + static_cast<long>(half), state.end(), out.begin());
        alignment_force(delayed.first(half), delayed.subspan(half), agents, dim, params,
                        out.subspan(half));
    };
}

InitialDatum constant_datum(EnsembleState state) {
    if (state.n < 2 || state.d < 1) {
        throw InvalidInputError("ensemble needs N >= 2 agents and d >= 1");
    }
    if (!state.finite()) {
        throw InvalidInputError("initial ensemble is not finite");
    }
    InitialDatum datum;
    datum.n = state.n;
    datum.d = state.d;
    datum.constant = true;
    auto shared = std::make_shared<const EnsembleState>(std::move(state));
    datum.state = [shared](double) { return *shared; };
    datum.rate = [shared](double) { return EnsembleState(shared->n, shared->d); };
    return datum;
}

InitialDatum linear_ramp_datum(EnsembleState at_zero, Vector acceleration) {
    if (at_zero.n < 2 || at_zero.d < 1) {
        throw InvalidInputError("ensemble needs N >= 2 agents and d >= 1");
    }
    if (acceleration.size() != at_zero.n * at_zero.d) {
        throw InvalidInputError("ramp slope must have N*d entries");
    }
    if (!at_zero.finite() ||
        !std::all_of(acceleration.begin(), acceleration.end(), [](double a) { return std::isfinite(a); })) {
        throw InvalidInputError("ramp datum is not finite");
    }
    InitialDatum datum;
    datum.n = at_zero.n;
    datum.d = at_zero.d;
    datum.constant = std::all_of(acceleration.begin(), acceleration.end(), [](double a) { return a == 0.0; });
    auto base = std::make_shared<const EnsembleState>(std::move(at_zero));
    auto slope = std::make_shared<const Vector>(std::move(acceleration));
    datum.state = [base, slope](double s) {
        EnsembleState out = *base;
        for (std::size_t k = 0; k < out.x.size(); ++k) {
            out.x[k] += s * base->v[k] + 0.5 * s * s * (*slope)[k];
            out.v[k] += s * (*slope)[k];
        }
        return out;
    };
    datum.rate = [base, slope](double s) {
        EnsembleState out(base->n, base->d);
        for (std::size_t k = 0; k < out.x.size(); ++k) {
            out.x[k] = base->v[k] + s * (*slope)[k];
            out.v[k] = (*slope)[k];
        }
        return out;
    };
    return datum;
}

EnsembleState random_cloud(std::size_t agents, std::size_t dim, double box, double spread,
                           std::uint64_t seed) {
    if (agents < 2 || dim < 1) {
        throw InvalidInputError("ensemble needs N >= 2 agents and d >= 1");
    }
    if (!(box >= 0.0) || !(spread >= 0.0)) {
        throw InvalidInputError("position box and velocity spread must be >= 0");
    }
    // mt19937_64 output is fully specified; taking the top 53 bits keeps the
    // draws identical across standard libraries.
    std::mt19937_64 rng(seed);
    auto unit = [](std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; };
    EnsembleState s(agents, dim);
    for (double& xi : s.x) {
        xi = box * unit(rng);
    }
    for (double& vi : s.v) {
        vi = spread * (2.0 * unit(rng) - 1.0);
    }
    for (std::size_t k = 0; k < dim; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < agents; ++i) mean += s.v[i * dim + k];
        mean /= static_cast<double>(agents);
        for (std::size_t i = 0; i < agents; ++i) s.v[i * dim + k] -= mean;
    }
    return s;
}

HistoryBuffer make_history(const InitialDatum& datum, double tau, int m, bool retain_full) {
    auto trajectory = [&datum](double s) { return datum.state(s).pack(); };
    auto derivative = [&datum](double s) { return datum.rate(s).pack(); };
    return init_history(trajectory, derivative, tau, m, retain_full);
}

}  // namespace csdelay
