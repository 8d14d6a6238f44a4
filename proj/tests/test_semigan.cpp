#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fd_oracle.hpp"
#include "fdd/baselines.hpp"
#include "fdd/semigan.hpp"

using namespace fdd;
using fdd::testing::fd_gradient;
using fdd::testing::max_rel_error;

namespace {

// p(class k | l) straight from the definition, in long double, no shifting.
long double direct_prob(std::span<const double> l, std::size_t k)
{
    long double denom = 1.0L;
    for (double v : l) denom += std::exp(static_cast<long double>(v));
    return std::exp(static_cast<long double>(l[k])) / denom;
}

long double direct_fake(std::span<const double> l)
{
    long double denom = 1.0L;
    for (double v : l) denom += std::exp(static_cast<long double>(v));
    return 1.0L / denom;
}

Batch random_batch(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Batch b(rows, cols);
    for (double& v : b.values()) v = rng.uniform(lo, hi);
    return b;
}

SemiGanConfig tiny_config(std::size_t features, int classes, std::uint64_t seed)
{
    SemiGanConfig c;
    c.noise_dim = 3;
    c.gen_layers = {3, 5, features};
    c.disc_layers = {features, 6, 4, static_cast<std::size_t>(classes)};
    c.n_classes = classes;
    c.seed = seed;
    return c;
}

// Separable Gaussian blobs with `classes` classes in `dim` dimensions.
Dataset blobs(std::size_t per_class, int classes, std::size_t dim, double spread, std::uint64_t seed)
{
    Rng rng(seed);
    Rng centres(99);
    std::vector<std::vector<double>> mu(static_cast<std::size_t>(classes), std::vector<double>(dim));
    for (auto& m : mu) for (double& v : m) v = centres.uniform(-1.0, 1.0);
    Dataset d;
    d.features = Batch(per_class * static_cast<std::size_t>(classes), dim);
    for (int c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t r = static_cast<std::size_t>(c) * per_class + i;
            for (std::size_t j = 0; j < dim; ++j) d.features(r, j) = mu[static_cast<std::size_t>(c)][j] + spread * rng.normal();
            d.labels.push_back(c);
            d.severity.push_back(kNoSeverity);
        }
    }
    return d;
}

} // namespace

TEST(ClassProbs, SymmetricZeroLogits)
{
    const auto p = class_probs(Batch(1, 8, 0.0));
    for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(p(0, k), 1.0 / 9.0, 1e-15);
}

TEST(ClassProbs, LargeLogitTakesAllMass)
{
    Batch l(1, 8, 0.0);
    l(0, 2) = 50.0;
    const auto p = class_probs(l);
    EXPECT_NEAR(p(0, 2), 1.0, 1e-20 + 1e-15);
    EXPECT_LT(p(0, 8), 1e-21);
}

TEST(ClassProbs, HandComputedExample)
{
    Batch l(1, 8, 0.0);
    l(0, 0) = 1.0;
    const auto p = class_probs(l);
    const double e = std::numbers::e;
    // denominator 1 + e + 7 = 8 + e
    EXPECT_NEAR(p(0, 0), e / (8.0 + e), 1e-15);
    EXPECT_NEAR(p(0, 0), 0.253612, 1e-6);
    EXPECT_NEAR(p(0, 8), 1.0 / (8.0 + e), 1e-15);
    EXPECT_NEAR(p(0, 8), 0.093299, 1e-6);
    for (std::size_t k = 1; k < 8; ++k) EXPECT_NEAR(p(0, k), 1.0 / (8.0 + e), 1e-15);
}

TEST(ClassProbs, NormalisedAndEqualToExplicitZeroLogitSoftmax)
{
    Rng rng(10);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + rng.below(10);
        const Batch l = random_batch(1, n, rng, -50.0, 50.0);
        const auto p = class_probs(l);
        double sum = 0.0;
        for (double v : p.row(0)) {
            ASSERT_GE(v, 0.0);
            sum += v;
        }
        ASSERT_NEAR(sum, 1.0, 1e-9);
        // (N+1)-way softmax with the last logit pinned at zero.
        std::vector<double> ext(l.row(0).begin(), l.row(0).end());
        ext.push_back(0.0);
        const double mx = *std::max_element(ext.begin(), ext.end());
        double z = 0.0;
        for (double v : ext) z += std::exp(v - mx);
        for (std::size_t k = 0; k <= n; ++k) {
            ASSERT_NEAR(p(0, k), std::exp(ext[k] - mx) / z, 1e-12);
        }
    }
}

TEST(ClassProbs, NoOverflowAtExtremeLogits)
{
    Batch l(2, 3, {800.0, -800.0, 0.0, -800.0, -800.0, -800.0});
    const auto p = class_probs(l);
    EXPECT_TRUE(p.all_finite());
    EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(p(1, 3), 1.0, 1e-15);
}

TEST(Losses, ZeroLogitValues)
{
    DenseNet zero_disc({{4, 8, Activation::identity()}}); // all-zero params -> all-zero logits
    Rng rng(1);
    const Batch x = random_batch(5, 4, rng);
    const std::vector<int> t = {0, 3, 7, 1, 2};
    EXPECT_NEAR(loss_labeled(zero_disc, x, t), std::log(9.0), 1e-14);
    EXPECT_NEAR(loss_labeled(zero_disc, x, t), 2.1972, 5e-5);
    EXPECT_NEAR(loss_unlabeled(zero_disc, x), -std::log(8.0 / 9.0), 1e-14);
    EXPECT_NEAR(loss_unlabeled(zero_disc, x), 0.11778, 5e-6);
    EXPECT_NEAR(loss_fake(zero_disc, x), std::log(9.0), 1e-14);

    SemiGanConfig cfg = tiny_config(4, 8, 3);
    auto m = make_semigan(cfg);
    m.discriminator = zero_disc;
    EXPECT_NEAR(loss_generator(m, random_batch(6, 3, rng)), -std::log(8.0 / 9.0), 1e-14);
}

TEST(Losses, HandSetLogits)
{
    const Batch l(2, 3, {2.0, -1.0, 0.5, 0.3, 0.3, -4.0});
    const std::vector<int> t = {0, 2};
    const long double lab = -(std::log(direct_prob(l.row(0), 0)) + std::log(direct_prob(l.row(1), 2))) / 2.0L;
    EXPECT_NEAR(labeled_logit_loss(l, t).loss, static_cast<double>(lab), 1e-12);
    const long double fake = -(std::log(direct_fake(l.row(0))) + std::log(direct_fake(l.row(1)))) / 2.0L;
    EXPECT_NEAR(fake_logit_loss(l).loss, static_cast<double>(fake), 1e-12);
    const long double real =
        -(std::log(1.0L - direct_fake(l.row(0))) + std::log(1.0L - direct_fake(l.row(1)))) / 2.0L;
    EXPECT_NEAR(real_logit_loss(l).loss, static_cast<double>(real), 1e-12);
}

TEST(Losses, LimitsAndHalfFake)
{
    Batch sure(1, 3, {60.0, -5.0, -5.0});
    EXPECT_LT(labeled_logit_loss(sure, std::vector<int>{0}).loss, 1e-20);
    EXPECT_LT(real_logit_loss(sure).loss, 1e-20);
    Batch very_fake(1, 3, -60.0);
    EXPECT_LT(fake_logit_loss(very_fake).loss, 1e-20);
    // One class with logit 0: p_fake = 1/2.
    EXPECT_NEAR(real_logit_loss(Batch(1, 1, 0.0)).loss, std::log(2.0), 1e-15);
}

TEST(Losses, ClampedValueStaysFinite)
{
    Batch hopeless(1, 2, {-800.0, 800.0});
    const auto r = labeled_logit_loss(hopeless, std::vector<int>{0});
    EXPECT_NEAR(r.loss, -std::log(1e-12), 1e-9);
    EXPECT_TRUE(r.grad.all_finite());
    EXPECT_LT(r.grad(0, 0), 0.0); // still pushes the true class up
}

TEST(Losses, NonNegativeOnRandomLogits)
{
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
        const Batch l = random_batch(3, 8, rng, -30.0, 30.0);
        std::vector<int> t = {static_cast<int>(rng.below(8)), static_cast<int>(rng.below(8)), 0};
        EXPECT_GE(labeled_logit_loss(l, t).loss, 0.0);
        EXPECT_GE(real_logit_loss(l).loss, 0.0);
        EXPECT_GE(fake_logit_loss(l).loss, 0.0);
    }
}

TEST(Losses, LabelOutOfRange)
{
    EXPECT_THROW(labeled_logit_loss(Batch(1, 3), std::vector<int>{3}), InputError);
    EXPECT_THROW(labeled_logit_loss(Batch(1, 3), std::vector<int>{-1}), InputError);
    EXPECT_THROW(labeled_logit_loss(Batch(2, 3), std::vector<int>{0}), DimensionError);
}

// Property: parameter gradients of all four losses agree with central differences.
TEST(Losses, GradientsMatchFiniteDifferences)
{
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t features = 2 + rng.below(4);
        const int classes = 2 + static_cast<int>(rng.below(4));
        auto m = make_semigan(tiny_config(features, classes, rng.next_u64()));
        const std::size_t rows = 1 + rng.below(6);
        const Batch x = random_batch(rows, features, rng);
        std::vector<int> t(rows);
        for (int& v : t) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        const Batch z = random_batch(rows, 3, rng, -2.0, 2.0);
        auto& d = m.discriminator;

        auto check_d = [&](const char* name, auto loss) {
            loss();
            const std::vector<double> analytic(d.grads().begin(), d.grads().end());
            const auto numeric = fd_gradient(d.params(), loss);
            EXPECT_LT(max_rel_error(analytic, numeric), 1e-4) << name << " trial " << trial;
        };
        check_d("labeled", [&] { return loss_labeled(d, x, t); });
        check_d("unlabeled", [&] { return loss_unlabeled(d, x); });
        check_d("fake", [&] { return loss_fake(d, x); });

        loss_generator(m, z);
        const std::vector<double> analytic(m.generator.grads().begin(), m.generator.grads().end());
        const auto numeric = fd_gradient(m.generator.params(), [&] { return loss_generator(m, z); });
        EXPECT_LT(max_rel_error(analytic, numeric), 1e-4) << "generator trial " << trial;
    }
}

TEST(Training, GeneratorStepLeavesDiscriminatorUntouched)
{
    auto m = make_semigan(tiny_config(4, 3, 5));
    const std::vector<double> before(m.discriminator.params().begin(), m.discriminator.params().end());
    Rng rng(6);
    for (int i = 0; i < 5; ++i) {
        loss_generator(m, random_batch(8, 3, rng));
        m.gen_opt.apply(m.generator.params(), m.generator.grads());
    }
    const std::vector<double> after(m.discriminator.params().begin(), m.discriminator.params().end());
    EXPECT_EQ(before, after);
}

TEST(Training, ZeroIterationsReturnsInitialisation)
{
    const auto data = blobs(10, 3, 4, 0.3, 1);
    auto cfg = tiny_config(4, 3, 21);
    cfg.iterations = 0;
    const auto trained = train_semigan(cfg, data, UnlabeledSet{data.features});
    const auto init = make_semigan(cfg);
    EXPECT_TRUE(std::equal(trained.discriminator.params().begin(), trained.discriminator.params().end(),
                           init.discriminator.params().begin()));
    EXPECT_TRUE(std::equal(trained.generator.params().begin(), trained.generator.params().end(),
                           init.generator.params().begin()));
}

TEST(Training, DeterministicGivenSeed)
{
    const auto data = blobs(10, 3, 4, 0.3, 1);
    auto cfg = tiny_config(4, 3, 8);
    cfg.iterations = 3;
    cfg.batch_size = 7;
    const auto a = train_semigan(cfg, data, UnlabeledSet{data.features});
    const auto b = train_semigan(cfg, data, UnlabeledSet{data.features});
    EXPECT_TRUE(std::equal(a.discriminator.params().begin(), a.discriminator.params().end(),
                           b.discriminator.params().begin()));
    EXPECT_TRUE(std::equal(a.generator.params().begin(), a.generator.params().end(), b.generator.params().begin()));
    cfg.seed = 9;
    const auto c = train_semigan(cfg, data, UnlabeledSet{data.features});
    EXPECT_FALSE(std::equal(a.discriminator.params().begin(), a.discriminator.params().end(),
                            c.discriminator.params().begin()));
}

TEST(Training, MinibatchTraversalStepCounts)
{
    // 10 unlabeled rows in batches of 4 -> batches of 4, 4 and 2; three D steps and one G step each.
    const auto data = blobs(4, 3, 4, 0.3, 2);
    auto cfg = tiny_config(4, 3, 1);
    cfg.iterations = 2;
    cfg.batch_size = 4;
    Rng rng(3);
    const UnlabeledSet u{random_batch(10, 4, rng)};
    std::vector<IterationLog> log;
    const auto m = train_semigan(cfg, data, u, &data, &log);
    EXPECT_EQ(m.disc_opt.step(), 2u * 3u * 3u);
    EXPECT_EQ(m.gen_opt.step(), 2u * 3u);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_FALSE(std::isnan(log[1].val_accuracy));
    std::ostringstream os;
    write_training_log(os, log);
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Training, DivergenceNamesIterationAndStep)
{
    const auto data = blobs(4, 3, 4, 0.3, 2);
    auto cfg = tiny_config(4, 3, 1);
    cfg.iterations = 1;
    Batch poisoned(3, 4, 0.5);
    poisoned(1, 2) = std::nan("");
    try {
        train_semigan(cfg, data, UnlabeledSet{poisoned});
        FAIL() << "expected a divergence error";
    } catch (const DivergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration 0, step 3"), std::string::npos) << e.what();
    }
}

TEST(Training, RejectsBadInputs)
{
    const auto data = blobs(4, 3, 4, 0.3, 2);
    auto cfg = tiny_config(4, 3, 1);
    EXPECT_THROW(train_semigan(cfg, data, UnlabeledSet{Batch(0, 4)}), InputError);
    EXPECT_THROW(train_semigan(cfg, data, UnlabeledSet{Batch(5, 3)}), DimensionError);
    auto bad = cfg;
    bad.disc_layers.back() = 5;
    EXPECT_THROW(bad.validate(), InputError);
    auto wrong_labels = data;
    wrong_labels.labels[0] = 3;
    EXPECT_THROW(train_semigan(cfg, wrong_labels, UnlabeledSet{data.features}), InputError);
}

TEST(Training, LabeledOnlyMatchesSupervisedBaseline)
{
    // Without the unlabeled, fake and generator steps the discriminator is a plain classifier
    // trained on the labeled batch; it should do as well as the same-shaped baseline.
    const auto train = blobs(20, 4, 6, 0.35, 3);
    const auto test = blobs(500, 4, 6, 0.35, 4);
    SemiGanConfig cfg;
    cfg = cfg.with_shape(6, 4);
    cfg.labeled_only = true;
    cfg.iterations = 300;
    cfg.seed = 5;
    auto m = train_semigan(cfg, train, UnlabeledSet{});
    SupervisedConfig sc;
    sc.n_classes = 4;
    sc.epochs = 300;
    sc.seed = 5;
    auto net = train_supervised(sc, train);
    EXPECT_EQ(net.layers(), m.discriminator.layers());
    const double a_gan = accuracy(classify(m, test.features), test.labels);
    const double a_sup = evaluate(net, test).accuracy;
    EXPECT_GT(a_gan, 0.8);
    EXPECT_NEAR(a_gan, a_sup, 0.05);
}

TEST(Classify, ArgmaxRules)
{
    Batch l(3, 4, 0.0);
    l(0, 3) = 10.0;
    l(2, 1) = 2.0;
    l(2, 2) = 2.0;
    EXPECT_EQ(argmax_rows(l), (std::vector<int>{3, 0, 1}));
}

TEST(Classify, ShiftInvariance)
{
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        Batch l = random_batch(4, 8, rng, -20.0, 20.0);
        const auto before = argmax_rows(l);
        const double c = rng.uniform(-100.0, 100.0);
        for (double& v : l.values()) v += c;
        EXPECT_EQ(argmax_rows(l), before);
    }
}

TEST(Classify, WidthMismatch)
{
    auto m = make_semigan(tiny_config(4, 3, 1));
    EXPECT_THROW(classify(m, Batch(2, 5)), DimensionError);
}
