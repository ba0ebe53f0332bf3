#include <gtest/gtest.h>

#include <cmath>

#include "csdelay/diagnostics.hpp"
#include "csdelay/errors.hpp"
#include "csdelay/simulation.hpp"

using namespace csdelay;

namespace {

double brute_min_psi(const EnsembleState& s, const Kernel& k) {
    double best = 1.0;
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < s.n; ++j) {
            double r2 = 0.0;
            for (std::size_t c = 0; c < s.d; ++c) {
                const double dx = s.x[i * s.d + c] - s.x[j * s.d + c];
                r2 += dx * dx;
            }
            best = std::min(best, k(std::sqrt(r2)));
        }
    }
    return best;
}

SimulationRun run(const InitialDatum& datum, const ModelParams& p, double t_end, int m = 20) {
    SimulationOptions o;
    o.m = m;
    o.t_end = t_end;
    return simulate_ensemble(datum, p, o);
}

std::vector<DiagnosticsRecord> records(const SimulationRun& r, const ModelParams& p) {
    std::vector<DiagnosticsRecord> out;
    for (long k = 0; k <= r.series.last_index(); ++k) out.push_back(make_record(r.series, k, p));
    return out;
}

}  // namespace

TEST(Fluctuation, BasicValues) {
    EXPECT_EQ(velocity_fluctuation(EnsembleState(3, 2, Vector(6, 0.0), {1, 2, 1, 2, 1, 2})), 0.0);
    const EnsembleState two(2, 1, {0.0, 1.0}, {1.0, -1.0});
    EXPECT_DOUBLE_EQ(velocity_fluctuation(two), 4.0);
    EXPECT_DOUBLE_EQ(weighted_fluctuation(two, Kernel::constant(1.0)), 4.0);
    EXPECT_NEAR(weighted_fluctuation(two, Kernel::cucker_smale(0.5)), 2.8284271, 1e-7);
}

TEST(Fluctuation, HomogeneousOfDegreeTwo) {
    EnsembleState s = random_cloud(9, 3, 1.0, 1.0, 3);
    const double V = velocity_fluctuation(s);
    for (double& v : s.v) v *= -2.5;
    EXPECT_NEAR(velocity_fluctuation(s), 6.25 * V, 1e-12 * V);
}

TEST(Fluctuation, BoundsFromMinInteraction) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const EnsembleState s = random_cloud(12, 2, 3.0, 1.0, seed);
        const Kernel k = Kernel::cucker_smale(0.4);
        const double V = velocity_fluctuation(s);
        const double D = weighted_fluctuation(s, k);
        const double phi = min_interaction(s, k);
        EXPECT_NEAR(phi, brute_min_psi(s, k), 1e-15);
        EXPECT_LE(D, V);
        EXPECT_LE(phi * V, D * (1.0 + 1e-14));
    }
}

TEST(Geometry, DiameterAndPhi) {
    const EnsembleState same(3, 2, {1, 1, 1, 1, 1, 1}, Vector(6, 0.0));
    EXPECT_EQ(position_diameter(same), 0.0);
    EXPECT_EQ(min_interaction(same, Kernel::cucker_smale(0.3)), 1.0);
    const EnsembleState line(3, 1, {0.0, 1.0, 3.0}, {0, 0, 0});
    EXPECT_DOUBLE_EQ(position_diameter(line), 3.0);
    EXPECT_DOUBLE_EQ(min_interaction(line, Kernel::cucker_smale(1.0)), 0.1);
}

TEST(Fluctuation, DerivativeZeroWhenAligned) {
    const EnsembleState s(3, 2, {0, 0, 1, 2, -1, 4}, {1, 1, 1, 1, 1, 1});
    EXPECT_EQ(weighted_fluctuation_derivative(s, s, {1.0, 0.1, Kernel::cucker_smale(0.3)}), 0.0);
}

TEST(Fluctuation, DerivativeAtOriginForConstantKernel) {
    for (std::size_t n : {2u, 5u, 11u}) {
        const EnsembleState s = random_cloud(n, 2, 1.0, 1.0, n);
        const ModelParams p{1.3, 0.2, Kernel::constant(1.0)};
        const double D = weighted_fluctuation(s, p.kernel);
        EXPECT_NEAR(weighted_fluctuation_derivative(s, s, p), -2.0 * p.lambda * D, 1e-12 * D);
    }
}

TEST(Fluctuation, DerivativeMatchesFiniteDifferenceAlongRun) {
    const InitialDatum datum = constant_datum(random_cloud(6, 2, 2.0, 1.0, 77));
    const ModelParams p{1.0, 0.1, Kernel::cucker_smale(0.5)};
    const SimulationRun r = run(datum, p, 1.0, 40);
    const NodeSeries& s = r.series;
    const double h = s.h;
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = s.origin_pos() + 1; i + 1 < s.size(); ++i) {
        const double fd = (s.D[i + 1] - s.D[i - 1]) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - s.D_rate[i]));
        scale = std::max(scale, std::abs(s.D_rate[i]));
    }
    EXPECT_LT(worst, 1e-3 * scale);
}

TEST(Lyapunov, WindowIdentities) {
    const std::vector<double> zero(11, 0.0);
    EXPECT_DOUBLE_EQ(lyapunov(3.0, zero, 0.5, 1.2), 3.0);
    const std::vector<double> flat(11, 2.0);
    const double tau = 0.5, lambda = 1.2;
    EXPECT_NEAR(lyapunov(3.0, flat, tau, lambda), 3.0 + 2.0 * std::pow(lambda * tau, 3) * 2.0, 1e-14);
    EXPECT_THROW(lyapunov(1.0, std::vector<double>{1.0}, 0.5, 1.0), InvalidInputError);
}

TEST(Lyapunov, TrapezoidConvergesSecondOrder) {
    const double tau = 1.0, lambda = 1.0;
    // D~(s) = e^{s} on window s in [0, 1] (stored at t - 2tau .. t - tau);
    // int_0^1 s e^s ds = 1.
    auto err = [&](int m) {
        std::vector<double> w;
        for (int j = 0; j <= m; ++j) w.push_back(std::exp(static_cast<double>(j) / m));
        return std::abs(lyapunov(0.0, w, tau, lambda) - 4.0);
    };
    EXPECT_NEAR(std::log2(err(16) / err(32)), 2.0, 0.05);
}

TEST(InitialL0, ClosedFormAndUndelayed) {
    const EnsembleState two(2, 1, {0.0, 1.0}, {1.0, -1.0});
    const InitialDatum datum = constant_datum(two);
    ModelParams p{1.0, 0.1, Kernel::cucker_smale(0.5)};
    EXPECT_NEAR(initial_L0(datum, p), 5.8684, 5e-5);
    EXPECT_NEAR(initial_L0(datum, p), 1.2 * std::exp(0.2) * 4.0 + 0.002 * 4.0 * std::pow(2.0, -0.5), 1e-12);
    p.tau = 0.0;
    EXPECT_DOUBLE_EQ(initial_L0(datum, p), 4.0);
}

TEST(InitialL0, QuadratureMatchesClosedFormWhenRampIsZero) {
    const EnsembleState s = random_cloud(5, 2, 1.0, 1.0, 9);
    const ModelParams p{0.8, 0.3, Kernel::cucker_smale(0.3)};
    const InitialDatum ramp = linear_ramp_datum(s, Vector(10, 0.0));
    const InitialDatum constant = constant_datum(s);
    EXPECT_NEAR(initial_L0(ramp, p, 128), initial_L0(constant, p), 1e-3 * initial_L0(constant, p));
}

TEST(InitialM0, ConstantDatum) {
    const ModelParams p{1.5, 0.2, Kernel::constant(1.0)};
    const M0Estimate m = initial_M0(constant_datum(EnsembleState(2, 1, {0.0, 1.0}, {1.0, -1.0})), p);
    ASSERT_TRUE(m.value);
    EXPECT_NEAR(*m.value, 2.0 * p.lambda, 1e-12);
    EXPECT_EQ(m.interior_sup, 0.0);
    EXPECT_FALSE(m.low_confidence);
}

TEST(InitialM0, BoundedByDerivativeEstimate) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const InitialDatum datum = constant_datum(random_cloud(8, 2, 2.0, 1.0, seed));
        for (double beta : {0.2, 0.5, 1.5}) {
            const ModelParams p{1.0, 0.1, Kernel::cucker_smale(beta)};
            const InitialDatumReport r = analyze_datum(datum, p);
            ASSERT_TRUE(r.M0);
            EXPECT_LE(*r.M0, 4.0 * p.lambda + p.kernel.alpha() * std::sqrt(2.0 * r.L0) / 2.0);
        }
    }
}

TEST(InitialM0, UndefinedForAlignedDatum) {
    const InitialDatum datum = constant_datum(EnsembleState(3, 1, {0, 1, 2}, {1, 1, 1}));
    const M0Estimate m = initial_M0(datum, {1.0, 0.1, Kernel::constant(1.0)});
    EXPECT_FALSE(m.value);
}

TEST(InitialM0, RampDatumHasInteriorSup) {
    const EnsembleState s(2, 1, {0.0, 1.0}, {1.0, -1.0});
    const M0Estimate m = initial_M0(linear_ramp_datum(s, {0.5, -0.5}), {1.0, 0.2, Kernel::constant(1.0)});
    ASSERT_TRUE(m.value);
    // u(s) = 2 + s on [-tau, 0]: |D'|/D = 2 / (2 + s), sup at s = -tau.
    EXPECT_NEAR(m.interior_sup, 2.0 / 1.8, 1e-2);
    EXPECT_GE(*m.value, m.interior_sup);
}

TEST(Flocking, Verdicts) {
    const ModelParams p{1.0, 0.2, Kernel::constant(1.0)};
    const SimulationRun aligned = run(constant_datum(EnsembleState(3, 1, {0, 4, 9}, {2, 2, 2})), p, 1.0);
    EXPECT_EQ(detect_flocking(records(aligned, p)), FlockingVerdict::Flocking);

    const EnsembleState two(2, 1, {0.0, 1.0}, {0.5, -0.5});
    const SimulationRun stable = run(constant_datum(two), p, 40.0);
    EXPECT_EQ(detect_flocking(records(stable, p)), FlockingVerdict::Flocking);

    const ModelParams unstable{1.0, 2.0, Kernel::constant(1.0)};
    SimulationOptions o;
    o.m = 8;
    o.t_end = 12000.0;
    const SimulationRun blow = simulate_ensemble(constant_datum(two), unstable, o);
    EXPECT_EQ(blow.status, IntegrationStatus::Diverged);
    EXPECT_EQ(detect_flocking(records(blow, unstable), {}, true), FlockingVerdict::Diverged);

    const SimulationRun short_run = run(constant_datum(two), p, 0.5);
    EXPECT_EQ(detect_flocking(records(short_run, p)), FlockingVerdict::NotDecided);
    EXPECT_EQ(detect_flocking(std::vector<DiagnosticsRecord>{}), FlockingVerdict::NotDecided);
}

TEST(Oscillation, Counters) {
    EXPECT_EQ(count_sign_changes(std::vector<double>{3, 2, 1, 0.5, 0.1}), 0);
    EXPECT_EQ(count_sign_changes(std::vector<double>{1, 0, -1, -2, 0, 0, 3, -1}), 3);
    EXPECT_EQ(count_increase_events(std::vector<double>{5, 4, 3, 2}), 0);
    EXPECT_EQ(count_increase_events(std::vector<double>{5, 4, 4.5, 5, 3, 3.5, 1}), 2);
    EXPECT_EQ(count_increase_events(std::vector<double>{5, 4, 4.0001, 3}, 0.01), 0);
    const OscillationReport r = detect_oscillation(std::vector<double>{1, -1, 2, -2});
    EXPECT_EQ(r.sign_changes, 3);
    EXPECT_EQ(r.increase_events, 1);
}

TEST(Oscillation, FeedbackVelocityDifference) {
    auto sign_changes = [](double tau, double t_end) {
        const EnsembleState two(2, 1, {0.0, 1.0}, {0.5, -0.5});
        SimulationOptions o;
        o.m = 16;
        o.t_end = t_end;
        o.retain_full = true;
        const SimulationRun r = simulate_ensemble(constant_datum(two), {1.0, tau, Kernel::constant(1.0)}, o);
        std::vector<double> u;
        for (long k = 0; k <= r.history->last_index(); ++k) u.push_back(r.history->state(k)[2] - r.history->state(k)[3]);
        return count_sign_changes(u);
    };
    EXPECT_GE(sign_changes(1.0, 30.0), 2);
    EXPECT_EQ(sign_changes(0.3, 200 * 0.3), 0);
}

TEST(Series, ConstantKernelDEqualsV) {
    const ModelParams p{1.0, 0.1, Kernel::constant(1.0)};
    const SimulationRun r = run(constant_datum(random_cloud(5, 2, 1.0, 1.0, 4)), p, 2.0);
    EXPECT_EQ(r.series.first_index, -20);
    for (std::size_t i = 0; i < r.series.size(); ++i) EXPECT_EQ(r.series.D[i], r.series.V[i]);
}

TEST(Inequalities, SmallDelayRunPassesAll) {
    const InitialDatum datum = constant_datum(random_cloud(12, 2, 1.0, 1.0, 5));
    const ModelParams p{1.0, 0.2, Kernel::cucker_smale(0.3)};
    const SimulationRun r = run(datum, p, 6.0);
    InequalityOptions o;
    o.L0 = initial_L0(datum, p);
    o.dX0 = position_diameter(datum.state(0.0));
    const InequalityLedger l = check_inequalities(r.series, p, o);
    EXPECT_TRUE(l.all_passed());
    for (const char* id : {"dVest(delta=0.5)", "dVest(delta=1)", "estV1", "D_ineq(eps=1)", "EstPhi", "Lyapunov",
                           "Lbound", "D_le_V", "phiV_le_D"}) {
        const InequalityCheck* c = l.find(id);
        ASSERT_NE(c, nullptr) << id;
        EXPECT_TRUE(c->applicable) << id;
        EXPECT_GT(c->evaluated, 0) << id;
        EXPECT_EQ(c->violations, 0) << id;
    }
}

TEST(Inequalities, LargeDelayMarksChecksInapplicable) {
    const InitialDatum datum = constant_datum(random_cloud(4, 1, 1.0, 1.0, 5));
    const ModelParams p{1.0, 0.8, Kernel::cucker_smale(0.3)};
    const SimulationRun r = run(datum, p, 5.0);
    InequalityOptions o;
    o.L0 = initial_L0(datum, p);
    o.dX0 = position_diameter(datum.state(0.0));
    const InequalityLedger l = check_inequalities(r.series, p, o);
    EXPECT_FALSE(l.find("Lyapunov")->applicable);
    EXPECT_FALSE(l.find("D_ineq(eps=1)")->applicable);
    EXPECT_TRUE(l.find("dVest(delta=1)")->applicable);
}

TEST(Inequalities, DetectsCorruptedSeries) {
    const InitialDatum datum = constant_datum(random_cloud(6, 2, 1.0, 1.0, 8));
    const ModelParams p{1.0, 0.1, Kernel::cucker_smale(0.3)};
    SimulationRun r = run(datum, p, 3.0);
    InequalityOptions o;
    o.L0 = initial_L0(datum, p);
    o.dX0 = position_diameter(datum.state(0.0));
    r.series.V[r.series.size() - 5] *= 1.5;
    const InequalityLedger l = check_inequalities(r.series, p, o);
    EXPECT_FALSE(l.all_passed());
    EXPECT_GT(l.find("D_le_V")->violations + l.find("Lyapunov")->violations + l.find("dVest(delta=1)")->violations, 0);
}

TEST(Inequalities, RejectsUndelayedSeries) {
    const ModelParams p{1.0, 0.0, Kernel::constant(1.0)};
    const SimulationRun r = run(constant_datum(random_cloud(3, 1, 1.0, 1.0, 1)), p, 0.1);
    EXPECT_THROW(check_inequalities(r.series, p, {}), InvalidInputError);
}

TEST(Simulation, MomentumConservedAndUndelayedBaseline) {
    EnsembleState s = random_cloud(10, 2, 1.0, 1.0, 12);
    for (std::size_t i = 0; i < 10; ++i) s.v[2 * i] += 1.0;
    const InitialDatum datum = constant_datum(s);
    for (double tau : {0.0, 0.15}) {
        const ModelParams p{1.0, tau, Kernel::cucker_smale(0.3)};
        const SimulationRun r = run(datum, p, 4.0);
        const Vector& p0 = r.series.momentum[r.series.origin_pos()];
        const Vector& p1 = r.series.momentum.back();
        EXPECT_NEAR(p0[0], 10.0, 1e-12);
        EXPECT_NEAR(p1[0], p0[0], 1e-8 * (1.0 + std::abs(p0[0])));
        EXPECT_NEAR(p1[1], p0[1], 1e-8 * (1.0 + std::abs(p0[1])));
        EXPECT_LT(r.series.V.back(), r.series.V[r.series.origin_pos()]);
    }
}
