#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fdd/data.hpp"
#include "fdd/preprocess.hpp"
#include "fdd/rng.hpp"

using namespace fdd;

namespace {

Dataset make(std::size_t rows, std::size_t cols, const std::vector<double>& values)
{
    Dataset d;
    d.features = Batch(rows, cols, values);
    d.labels.assign(rows, 0);
    d.severity.assign(rows, kNoSeverity);
    return d;
}

Dataset column(const std::vector<double>& v) { return make(v.size(), 1, v); }

// Brute-force population mean and std.
std::pair<double, double> moments(const std::vector<double>& v)
{
    long double s = 0;
    for (double x : v) s += x;
    const long double m = s / v.size();
    long double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return {static_cast<double>(m), static_cast<double>(std::sqrt(ss / v.size()))};
}

} // namespace

TEST(ValueOutliers, IdenticalRowsKeepEverything)
{
    const auto r = remove_value_outliers(make(1000, 2, std::vector<double>(2000, 3.5)));
    EXPECT_TRUE(r.removed.empty());
    EXPECT_EQ(r.data.rows(), 1000u);
}

TEST(ValueOutliers, SingleExtremeRowIsRemoved)
{
    std::vector<double> v(1000, 0.0);
    v[417] = 100.0;
    const auto [mean, sd] = moments(v);
    EXPECT_NEAR(mean, 0.1, 1e-12);
    EXPECT_NEAR(sd, 3.1607, 1e-4);
    EXPECT_GT(std::abs(100.0 - mean) / sd, 7.0);
    EXPECT_LT(std::abs(0.0 - mean) / sd, 7.0);
    const auto r = remove_value_outliers(column(v));
    EXPECT_EQ(r.removed, std::vector<std::size_t>{417});
    EXPECT_EQ(r.data.rows(), 999u);
}

TEST(ValueOutliers, GaussianSampleLosesNothing)
{
    Rng rng(2024);
    std::vector<double> v(10000 * 3);
    for (double& x : v) x = rng.normal();
    EXPECT_TRUE(remove_value_outliers(make(10000, 3, v)).removed.empty());
}

TEST(ValueOutliers, AnyFeatureTriggersAndConstantFeaturesNever)
{
    // feature 0 constant; feature 1 has an outlier in row 5
    std::vector<double> v;
    for (int r = 0; r < 200; ++r) {
        v.push_back(1.0);
        v.push_back(r == 5 ? 1000.0 : (r % 2 ? 1.0 : -1.0));
    }
    const auto res = remove_value_outliers(make(200, 2, v));
    EXPECT_EQ(res.removed, std::vector<std::size_t>{5});
    EXPECT_THROW(remove_value_outliers(column({1.0})), InputError);
}

TEST(ValueOutliers, IdempotentWhenNothingRemoved)
{
    Rng rng(1);
    std::vector<double> v(500);
    for (double& x : v) x = rng.uniform();
    const auto first = remove_value_outliers(column(v));
    ASSERT_TRUE(first.removed.empty());
    EXPECT_TRUE(remove_value_outliers(first.data).removed.empty());
}

TEST(RateOutliers, ConstantSeriesKeepsEverything)
{
    EXPECT_TRUE(remove_rate_outliers(column(std::vector<double>(50, 2.0))).removed.empty());
}

TEST(RateOutliers, SpikeRowIsRemovedNeighboursKept)
{
    std::vector<double> v(200);
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = 0.01 * static_cast<double>(t);
    v[100] += 50.0;
    // Brute-force rate statistics: the spike produces exactly two large rates.
    std::vector<double> rates;
    for (std::size_t t = 0; t + 1 < v.size(); ++t) rates.push_back(std::abs(v[t + 1] - v[t]));
    const auto [m, sd] = moments(rates);
    const double limit = m + 7.0 * sd;
    int big = 0;
    for (double r : rates) big += r > limit;
    ASSERT_EQ(big, 2);
    ASSERT_GT(rates[99], limit);
    ASSERT_GT(rates[100], limit);

    const auto res = remove_rate_outliers(column(v));
    EXPECT_EQ(res.removed, std::vector<std::size_t>{100});
}

TEST(RateOutliers, LevelShiftIsKept)
{
    std::vector<double> v(200);
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = 0.01 * static_cast<double>(t) + (t >= 100 ? 50.0 : 0.0);
    EXPECT_TRUE(remove_rate_outliers(column(v)).removed.empty());
}

TEST(RateOutliers, BoundaryRowsAreExemptAndShortInputRejected)
{
    std::vector<double> v(100, 0.0);
    v[0] = 80.0;  // only one rate touches row 0
    v[99] = 80.0; // only one rate touches the last row
    EXPECT_TRUE(remove_rate_outliers(column(v)).removed.empty());
    EXPECT_THROW(remove_rate_outliers(column({1.0, 2.0})), InputError);
}

TEST(Standardizer, RecordsMinMaxAndMapsAffinely)
{
    const auto train = make(3, 2, {10.0, 5.0, 30.0, 5.0, 20.0, 5.0});
    const auto s = fit_standardizer(train);
    EXPECT_EQ(s.min[0], 10.0);
    EXPECT_EQ(s.max[0], 30.0);
    EXPECT_EQ(s.min[1], s.max[1]);
    const auto out = apply_standardizer(s, Batch(4, 2, {20.0, 5.0, 10.0, 5.0, 30.0, 7.0, 35.0, 5.0}));
    EXPECT_EQ(out(0, 0), 0.0);
    EXPECT_EQ(out(1, 0), -1.0);
    EXPECT_EQ(out(2, 0), 1.0);
    EXPECT_EQ(out(3, 0), 1.5); // 2 * (35 - 10) / 20 - 1
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(out(r, 1), 0.0); // constant feature
    }
    EXPECT_THROW(apply_standardizer(s, Batch(1, 3)), DimensionError);
}

TEST(Standardizer, TrainingExtremesMapToExactlyPlusMinusOne)
{
    Rng rng(9);
    std::vector<double> v(300 * 4);
    for (double& x : v) x = rng.uniform(-1e3, 1e5) * rng.uniform();
    const auto d = make(300, 4, v);
    const auto s = fit_standardizer(d);
    const auto out = apply_standardizer(s, d.features);
    for (std::size_t c = 0; c < 4; ++c) {
        double lo = 2, hi = -2;
        for (std::size_t r = 0; r < 300; ++r) {
            lo = std::min(lo, out(r, c));
            hi = std::max(hi, out(r, c));
        }
        EXPECT_EQ(lo, -1.0);
        EXPECT_EQ(hi, 1.0);
    }
}

TEST(Standardizer, StatsIgnoreRowsOutsideTheTrainingPartition)
{
    const auto train = make(3, 1, {1.0, 2.0, 3.0});
    const auto s1 = fit_standardizer(train);
    const auto test = make(2, 1, {100.0, -100.0});
    (void)apply_standardizer(s1, test);
    const auto s2 = fit_standardizer(train);
    EXPECT_EQ(s1.min, s2.min);
    EXPECT_EQ(s1.max, s2.max);
    EXPECT_EQ(apply_standardizer(s1, test.features)(0, 0), 2.0 * 99.0 / 2.0 - 1.0);
}

TEST(Standardizer, StatsRoundTrip)
{
    Rng rng(3);
    std::vector<double> v(40);
    for (double& x : v) x = rng.normal() * 1e-3 + 1.0 / 3.0;
    const auto s = fit_standardizer(make(10, 4, v));
    std::stringstream ss;
    save_stats(ss, s);
    const auto back = load_stats(ss);
    EXPECT_EQ(back.min, s.min);
    EXPECT_EQ(back.max, s.max);
    EXPECT_EQ(back.mean, s.mean);
    EXPECT_EQ(back.std, s.std);
    EXPECT_EQ(back.rate_mean, s.rate_mean);
    EXPECT_EQ(back.rate_std, s.rate_std);
}

TEST(ConstantFeatures, DropsOnlyConstantColumns)
{
    const auto d = make(3, 3, {1.0, 0.0, 4.0, 2.0, 0.0, 4.0, 3.0, 0.0, 4.0});
    const auto r = drop_constant_features(d);
    EXPECT_EQ(r.dropped, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(r.data.width(), 1u);
    const auto id = drop_constant_features(make(2, 2, {1.0, 2.0, 3.0, 4.0}));
    EXPECT_TRUE(id.dropped.empty());
    EXPECT_EQ(id.data.features, Batch(2, 2, {1.0, 2.0, 3.0, 4.0}));
}

TEST(ConstantFeatures, SixtyFiveColumnsWithFourConstantGiveSixtyOne)
{
    Rng rng(65);
    const std::size_t rows = 50;
    std::vector<double> v;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < 65; ++c) {
            v.push_back(c % 16 == 3 ? 7.0 : rng.normal());
        }
    }
    const auto r = drop_constant_features(make(rows, 65, v));
    EXPECT_EQ(r.dropped, (std::vector<std::size_t>{3, 19, 35, 51}));
    EXPECT_EQ(r.data.width(), 61u);
}

TEST(Pipeline, FixedOrderIndicesIntoRawAndDeterministic)
{
    // Rows 10 (value outlier) and 60 (spike) should go; column 2 is constant.
    std::vector<double> v;
    for (int r = 0; r < 120; ++r) {
        double a = 0.001 * r;
        if (r == 10) a = 1e6;
        // Wide ramp: the spike stays within 7 std of the values but not of the rates.
        double b = 0.8 * r;
        if (r == 60) b += 60.0;
        v.insert(v.end(), {a, b, 3.0});
    }
    const auto raw = make(120, 3, v);
    const auto p = filter_source(raw);
    EXPECT_EQ(p.report.steps, (std::vector<std::string>{"value_outliers", "rate_outliers", "drop_constant_features"}));
    EXPECT_EQ(p.report.value_outliers, std::vector<std::size_t>{10});
    EXPECT_EQ(p.report.rate_outliers, std::vector<std::size_t>{60});
    EXPECT_EQ(p.report.dropped_features, std::vector<std::size_t>{2});
    EXPECT_EQ(p.data.rows(), 118u);
    EXPECT_EQ(p.data.width(), 2u);
    const auto again = filter_source(raw);
    EXPECT_EQ(again.data.features, p.data.features);

    std::stringstream ss;
    write_report(ss, p.report);
    EXPECT_NE(ss.str().find("value_outliers_removed 1"), std::string::npos);
}
