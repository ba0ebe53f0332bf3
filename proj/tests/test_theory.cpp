#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "csdelay/diagnostics.hpp"
#include "csdelay/errors.hpp"
#include "csdelay/simulation.hpp"
#include "csdelay/theory.hpp"

using namespace csdelay;

namespace {

const double kInvE = std::exp(-1.0);
const double kHalfInvE = 1.0 / (2.0 * std::numbers::e);

const ConditionEntry& condition(const CriticalDelayReport& r, const std::string& id) {
    for (const auto& c : r.conditions) {
        if (c.id == id) return c;
    }
    throw std::runtime_error("missing condition " + id);
}

// Independent re-check of both conditions for the constant path at a given delay.
bool constant_conditions_hold(double lambda, double alpha, double V0, double D0, double mu, double tau) {
    const double L0 = (2 * lambda * tau + 1) * std::exp(2 * lambda * tau) * V0 + 2 * std::pow(lambda * tau, 3) * D0;
    const bool n3 = lambda * mu > 4 * lambda * std::exp(mu * lambda * tau / 2) + alpha * std::sqrt(2 * L0) / 2;
    const bool lt = 2 * lambda * tau * std::exp(mu * lambda * tau) < 1;
    return n3 && lt;
}

double simplified(double lambda, double alpha, double V0, double D0, double tau) {
    const double L0 = (2 * lambda * tau + 1) * std::exp(2 * lambda * tau) * V0 + 2 * std::pow(lambda * tau, 3) * D0;
    return (2 / (lambda * tau)) * (std::log(1 / (2 * lambda * tau)) - 1) - alpha * std::sqrt(2 * L0) / (2 * lambda);
}

}  // namespace

TEST(Classify, Regimes) {
    EXPECT_EQ(classify_feedback(0.2), FeedbackRegime::NonOscillatoryStable);
    EXPECT_EQ(classify_feedback(1.0), FeedbackRegime::OscillatoryStable);
    EXPECT_EQ(classify_feedback(2.0), FeedbackRegime::Unstable);
    EXPECT_EQ(classify_feedback(kInvE), FeedbackRegime::OscillatoryStable);
    EXPECT_EQ(classify_feedback(std::numbers::pi / 2), FeedbackRegime::Unstable);
    EXPECT_THROW(classify_feedback(0.0), InvalidInputError);
}

TEST(Classify, Monotone) {
    int last = 0;
    for (int i = 1; i <= 4000; ++i) {
        const int r = static_cast<int>(classify_feedback(i * 1e-3));
        EXPECT_GE(r, last);
        last = r;
    }
}

TEST(Zstar, RootAndBounds) {
    const double z = solve_zstar();
    EXPECT_LT(std::abs(z * std::exp(2 * std::numbers::e * z) - 1), 1e-10);
    EXPECT_NEAR(z, 0.252, 1e-3);
    EXPECT_LT(z, kInvE);
    EXPECT_GT(z, 0.0);
}

TEST(DecayRate, Values) {
    EXPECT_DOUBLE_EQ(decay_rate(1.7, 0.0, 3.0), 2 * 1.7);
    EXPECT_DOUBLE_EQ(decay_rate(1.0, 0.25, 0.0), 1.0);
    const double lambda = 1.0, mu = 4.0;
    // 2 lambda tau e^(mu lambda tau) = 1 at tau solving it; bisect independently.
    double lo = 0.0, hi = 0.5;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (2 * lambda * mid * std::exp(mu * lambda * mid) < 1 ? lo : hi) = mid;
    }
    EXPECT_NEAR(decay_rate(lambda, lo, mu), 0.0, 1e-12);
}

TEST(DecayRate, SignMatchesCondition) {
    for (double tau : {0.01, 0.05, 0.1, 0.15, 0.2, 0.3}) {
        const double mu = 6.0;
        EXPECT_EQ(decay_rate(1.0, tau, mu) > 0.0, condition_lt_margin(1.0, mu, tau) > 0.0) << tau;
    }
}

TEST(ConstantPath, ConstantKernelDegenerates) {
    const CriticalDelayReport r = critical_delay_constant(2.0, 0.0, 3.0, 3.0);
    EXPECT_NEAR(r.tau1, 1.0 / (2 * std::numbers::e * 2.0), 1e-14);
    EXPECT_LE(r.tau_c, r.tau1);
    EXPECT_GT(r.tau_c, 0.0);
    EXPECT_TRUE(r.all_satisfied());
}

TEST(ConstantPath, RegressionFixture) {
    const double lambda = 1, alpha = 1, V0 = 1, D0 = 1;
    const CriticalDelayReport r = critical_delay_constant(lambda, alpha, V0, D0);
    EXPECT_NEAR(r.tau1, 0.169406447, 1e-8);
    EXPECT_NEAR(r.mu, 12.7776395, 1e-6);
    EXPECT_NEAR(r.tau2, 0.115011523, 1e-8);
    EXPECT_DOUBLE_EQ(r.tau_c, std::min(r.tau1, r.tau2));
    EXPECT_EQ(r.path, DatumPath::ConstantDatum);

    EXPECT_TRUE(constant_conditions_hold(lambda, alpha, V0, D0, r.mu, 0.999 * r.tau_c));
    EXPECT_GT(simplified(lambda, alpha, V0, D0, 0.999 * r.tau1), 0.0);
    EXPECT_LT(simplified(lambda, alpha, V0, D0, 1.001 * r.tau1), 0.0);
    EXPECT_LT(std::abs(simplified(lambda, alpha, V0, D0, r.tau1)), 1e-9);
    EXPECT_LT(std::abs(2 * lambda * r.tau2 * std::exp(r.mu * lambda * r.tau2) - 1), 1e-10);
    EXPECT_FALSE(constant_conditions_hold(lambda, alpha, V0, D0, r.mu, 1.5 * r.tau_c));
    EXPECT_TRUE(r.all_satisfied());
    EXPECT_TRUE(condition(r, "Ass:N3").satisfied);
    EXPECT_TRUE(condition(r, "ass:lt").satisfied);
}

TEST(ConstantPath, NecessaryConditionAcrossInputs) {
    for (double lambda : {0.3, 1.0, 4.0}) {
        for (double alpha : {0.0, 0.6, 2.0}) {
            for (double V0 : {1e-3, 1.0, 1e3}) {
                const CriticalDelayReport r = critical_delay_constant(lambda, alpha, V0, 0.7 * V0);
                EXPECT_LT(lambda * r.tau_c, kHalfInvE + 1e-12);
                EXPECT_TRUE(r.all_satisfied()) << lambda << " " << alpha << " " << V0;
                if (r.omega) EXPECT_GT(*r.omega, 0.0);
            }
        }
    }
}

TEST(ConstantPath, EvaluationDelayReportsOmega) {
    const CriticalDelayReport r = critical_delay_constant(1.0, 0.6, 2.0, 1.5, 0.05);
    ASSERT_TRUE(r.omega);
    EXPECT_DOUBLE_EQ(*r.omega, decay_rate(1.0, 0.05, r.mu));
    EXPECT_NEAR(r.l0, constant_datum_L0(1.0, 0.05, 2.0, 1.5), 1e-14);
}

TEST(ConstantPath, TrivialDatum) {
    EXPECT_THROW(critical_delay_constant(1.0, 1.0, 0.0, 0.0), TrivialDatumError);
    EXPECT_THROW(critical_delay_constant(1.0, 1.0, 1.0, 0.0), TrivialDatumError);
}

TEST(ConstantPath, MonotoneInSpread) {
    double last = std::numeric_limits<double>::infinity();
    for (double c : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double tau_c = critical_delay_constant(1.0, 0.6, c * c, 0.8 * c * c).tau_c;
        EXPECT_LE(tau_c, last);
        last = tau_c;
    }
}

TEST(GeneralPath, MuExceedsKAndZeroDelayIdentity) {
    const double lambda = 1.0, alpha = 0.6, V0 = 2.0, D0 = 1.5;
    auto L0 = [&](double tau) { return constant_datum_L0(lambda, tau, V0, D0); };
    const double M0 = 2.5;
    const CriticalDelayReport r = critical_delay_general(lambda, M0, L0, alpha);
    ASSERT_TRUE(r.k);
    EXPECT_GT(r.mu, *r.k);
    EXPECT_TRUE(condition(r, "mu>K").satisfied);
    EXPECT_EQ(r.path, DatumPath::GeneralDatum);
    EXPECT_TRUE(r.all_satisfied());
    EXPECT_LT(lambda * r.tau_c, kHalfInvE);
    // At tau = 0 the right side of D2 is lambda K.
    const double K = std::max(M0, 4 * lambda + alpha * std::sqrt(2 * V0) / 2) / lambda;
    EXPECT_NEAR(*r.k, K, 1e-14);
    EXPECT_NEAR(condition_d2_rhs(lambda, r.mu, M0, alpha, L0(0.0), 0.0), lambda * K, 1e-12);
    EXPECT_GT(condition_d2_margin(lambda, r.mu, M0, alpha, L0(0.999 * r.tau_c), 0.999 * r.tau_c), 0.0);
}

TEST(GeneralPath, UndefinedM0IsTrivial) {
    auto L0 = [](double) { return 1.0; };
    EXPECT_THROW(critical_delay_general(1.0, std::nullopt, L0, 0.6), TrivialDatumError);
}

TEST(GeneralPath, NotLargerThanConstantPath) {
    const EnsembleState s = random_cloud(10, 2, 1.0, 1.0, 2020);
    const InitialDatum datum = constant_datum(s);
    const ModelParams p{1.0, 0.0, Kernel::cucker_smale(0.3)};
    const InitialDatumReport init = analyze_datum(datum, p);
    const CriticalDelayReport c = critical_delay_constant(p.lambda, p.kernel.alpha(), init.V0, init.D0);
    auto L0 = [&](double tau) { return constant_datum_L0(p.lambda, tau, init.V0, init.D0); };
    const CriticalDelayReport g = critical_delay_general(p.lambda, init.M0, L0, p.kernel.alpha());
    EXPECT_LE(g.tau_c, c.tau_c);
    EXPECT_TRUE(c.all_satisfied());
    EXPECT_TRUE(g.all_satisfied());
}

TEST(BackwardForward, ConstantSeriesAlwaysPasses) {
    const std::vector<double> D(5 * 10 + 11, 3.0);
    const BackwardForwardCheck c = verify_backward_forward(D, 10, 1.0, 0.1, 0.5);
    EXPECT_TRUE(c.passed);
    EXPECT_GT(c.checked, 0);
}

TEST(BackwardForward, GenericExponential) {
    const double h = 0.01;
    auto series = [&](double a) {
        std::vector<double> y;
        for (long k = -100; k <= 400; ++k) y.push_back(std::exp(a * k * h));
        return y;
    };
    EXPECT_TRUE(verify_backward_forward_generic(series(0.8), -100, h, 1.0, 100).passed);
    EXPECT_TRUE(verify_backward_forward_generic(series(-0.8), -100, h, 1.0, 100).passed);
    const BackwardForwardCheck bad = verify_backward_forward_generic(series(1.3), -100, h, 1.0, 100);
    EXPECT_FALSE(bad.passed);
    EXPECT_GT(bad.violations, 0);
    EXPECT_LT(bad.worst_margin, 0.0);
}

TEST(BackwardForward, HypothesisPredicate) {
    EXPECT_TRUE(backward_forward_hypothesis(1.0, 1.0, 3.0, 2.0, 0.1));
    EXPECT_FALSE(backward_forward_hypothesis(1.0, 1.0, 3.0, 3.5, 0.1));
    EXPECT_FALSE(backward_forward_hypothesis(1.0, 1.0, 3.0, 0.0, 1.0));
}

TEST(BackwardForward, HoldsOnSimulatedRunBelowCriticalDelay) {
    const InitialDatum datum = constant_datum(random_cloud(8, 2, 1.0, 1.0, 31));
    ModelParams p{1.0, 0.0, Kernel::cucker_smale(0.3)};
    const InitialDatumReport init = analyze_datum(datum, p);
    const CriticalDelayReport r = critical_delay_constant(p.lambda, p.kernel.alpha(), init.V0, init.D0);
    p.tau = 0.9 * r.tau_c;
    SimulationOptions o;
    o.m = 20;
    o.t_end = 10.0;
    const SimulationRun run = simulate_ensemble(datum, p, o);
    const BackwardForwardCheck c = verify_backward_forward(run.series.D, run.series.m, p.lambda, r.mu, p.tau);
    EXPECT_TRUE(c.passed);
    EXPECT_GT(c.checked, 100);
}

TEST(NScaling, DecreasingWithSlopeInBand) {
    const std::vector<std::size_t> ns{10, 20, 40, 80, 160};
    const ScalingTable t = n_scaling_sweep(ScalingBase{}, ns);
    ASSERT_EQ(t.rows.size(), ns.size());
    for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].tau_c, t.rows[i - 1].tau_c);
    EXPECT_GE(t.slope, -1.4);
    EXPECT_LE(t.slope, -0.6);
}

TEST(NScaling, LoglogSlope) {
    const std::vector<double> x{1, 2, 4, 8};
    const std::vector<double> y{3, 3.0 / 4, 3.0 / 16, 3.0 / 64};
    EXPECT_NEAR(loglog_slope(x, y), -2.0, 1e-12);
    EXPECT_THROW(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), InvalidInputError);
}
