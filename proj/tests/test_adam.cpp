#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fdd/adam.hpp"

using namespace fdd;

namespace {

// Independent scalar Adam, written straight from the update equations.
struct ScalarAdam {
    double lr, b1, b2, eps;
    double m = 0.0, v = 0.0;
    int t = 0;

    double step(double theta, double g)
    {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double bc1 = 1.0, bc2 = 1.0;
        for (int i = 0; i < t; ++i) {
            bc1 *= b1;
            bc2 *= b2;
        }
        const double mh = m / (1 - bc1);
        const double vh = v / (1 - bc2);
        return theta - lr * mh / (std::sqrt(vh) + eps);
    }
};

} // namespace

TEST(Adam, DefaultsAndValidation)
{
    const AdamOptions o;
    EXPECT_EQ(o.lr, 2e-3);
    EXPECT_EQ(o.beta1, 0.5);
    EXPECT_EQ(o.beta2, 0.999);
    EXPECT_EQ(o.eps, 1e-8);
    EXPECT_THROW(AdamState(1, AdamOptions{.lr = 0.0}), InputError);
    EXPECT_THROW(AdamState(1, AdamOptions{.beta1 = 1.0}), InputError);
    EXPECT_THROW(AdamState(1, AdamOptions{.beta2 = 0.0}), InputError);
}

TEST(Adam, ZeroGradientLeavesParamsButCountsStep)
{
    AdamState s(3, {});
    std::vector<double> p = {1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    s.apply(p, g);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_EQ(s.step(), 1u);
}

TEST(Adam, FirstStepIsLearningRateTimesSign)
{
    AdamState s(1, AdamOptions{.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    std::vector<double> p = {0.0};
    s.apply(p, std::vector<double>{1.0});
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-18);
    EXPECT_NEAR(p[0], -0.001, 1e-10);
}

TEST(Adam, MinimizesScalarQuadratic)
{
    AdamState s(1, AdamOptions{.lr = 0.05});
    std::vector<double> theta = {0.0};
    bool reached = false;
    for (int i = 0; i < 2000 && !reached; ++i) {
        s.apply(theta, std::vector<double>{2.0 * (theta[0] - 3.0)});
        reached = std::abs(theta[0] - 3.0) < 1e-3;
    }
    EXPECT_TRUE(reached) << "theta = " << theta[0];
}

TEST(Adam, MatchesScalarOracleOnFiveParameterQuadratic)
{
    // f(theta) = sum_j c_j (theta_j - a_j)^2
    const std::vector<double> c = {0.5, 1.0, 2.0, 4.0, 0.25};
    const std::vector<double> a = {1.0, -2.0, 0.5, 3.0, -0.75};
    const AdamOptions o{.lr = 0.01, .beta1 = 0.5, .beta2 = 0.999, .eps = 1e-8};
    AdamState s(5, o);
    std::vector<double> theta(5, 0.0);
    std::vector<ScalarAdam> oracle(5, ScalarAdam{o.lr, o.beta1, o.beta2, o.eps});
    std::vector<double> ref(5, 0.0);
    for (int step = 0; step < 100; ++step) {
        std::vector<double> g(5);
        for (int j = 0; j < 5; ++j) {
            g[j] = 2.0 * c[j] * (theta[j] - a[j]);
        }
        s.apply(theta, g);
        for (int j = 0; j < 5; ++j) {
            ref[j] = oracle[j].step(ref[j], 2.0 * c[j] * (ref[j] - a[j]));
            ASSERT_LE(std::abs(theta[j] - ref[j]), 1e-12 * std::max(1.0, std::abs(ref[j]))) << "step " << step;
        }
    }
}

TEST(Adam, StepBoundForUnitGradients)
{
    const AdamOptions o{.lr = 0.01};
    AdamState s(4, o);
    std::vector<double> p(4, 0.0);
    const double signs[4] = {1.0, -1.0, 1.0, -1.0};
    for (int t = 0; t < 50; ++t) {
        const auto before = p;
        std::vector<double> g(4);
        for (int j = 0; j < 4; ++j) {
            g[j] = signs[(j + t) % 4];
        }
        s.apply(p, g);
        for (int j = 0; j < 4; ++j) {
            EXPECT_LE(std::abs(p[j] - before[j]), 10.0 * o.lr);
        }
    }
    for (double v : s.second_moment()) {
        EXPECT_GE(v, 0.0);
    }
}

TEST(Adam, DeterministicTrajectory)
{
    auto run = [] {
        AdamState s(2, {});
        std::vector<double> p = {0.3, -0.7};
        for (int t = 0; t < 20; ++t) {
            s.apply(p, std::vector<double>{std::sin(t + p[0]), std::cos(t * p[1])});
        }
        return p;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, RejectsMismatchAndNonFinite)
{
    AdamState s(2, {});
    std::vector<double> p = {0.0, 0.0};
    EXPECT_THROW(s.apply(p, std::vector<double>{1.0}), DimensionError);
    EXPECT_THROW(s.apply(p, std::vector<double>{1.0, std::nan("")}), NumericError);
    EXPECT_EQ(s.step(), 0u);
    EXPECT_EQ(p, (std::vector<double>{0.0, 0.0}));
}
