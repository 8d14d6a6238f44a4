#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fdd/adam.hpp"
#include "fdd/batch.hpp"
#include "fdd/data.hpp"
#include "fdd/error.hpp"
#include "fdd/nn.hpp"
#include "fdd/rng.hpp"

namespace fdd {

struct SemiGanConfig {
    int n_classes = kChillerClasses;
    std::size_t noise_dim = 8;
    std::vector<std::size_t> gen_layers = {8, 64, 64, 61};
    std::vector<std::size_t> disc_layers = {61, 32, 16, 8};
    std::size_t batch_size = 128;
    std::size_t iterations = 100;
    AdamOptions adam;
    /// Generator learning rate; 0 means "same as adam.lr".
    double gen_lr = 0.0;
    double leaky_slope = 0.2;
    std::uint64_t seed = 0;
    /// Skip the unlabeled, fake and generator updates: each iteration is one labeled step.
    bool labeled_only = false;

    std::size_t feature_count() const noexcept { return disc_layers.front(); }

    /// Same hidden widths, input/output widths adapted to a dataset.
    SemiGanConfig with_shape(std::size_t n_features, int classes) const
    {
        SemiGanConfig c = *this;
        c.n_classes = classes;
        c.gen_layers.front() = c.noise_dim;
        c.gen_layers.back() = n_features;
        c.disc_layers.front() = n_features;
        c.disc_layers.back() = static_cast<std::size_t>(classes);
        return c;
    }

    void validate() const
    {
        if (n_classes < 1) {
            throw InputError("semigan config: n_classes must be >= 1");
        }
        if (gen_layers.size() < 2 || disc_layers.size() < 2) {
            throw InputError("semigan config: generator and discriminator need at least two widths");
        }
        if (disc_layers.back() != static_cast<std::size_t>(n_classes)) {
            throw InputError("semigan config: discriminator output width must equal n_classes");
        }
        if (gen_layers.front() != noise_dim) {
            throw InputError("semigan config: generator input width must equal noise_dim");
        }
        if (gen_layers.back() != disc_layers.front()) {
            throw InputError("semigan config: generator output width must equal the feature count");
        }
        if (batch_size == 0) {
            throw InputError("semigan config: batch_size must be >= 1");
        }
    }
};

/// Generator, discriminator and one optimizer state for each.
struct SemiGanModel {
    DenseNet generator;
    DenseNet discriminator;
    AdamState gen_opt;
    AdamState disc_opt;
};

inline SemiGanModel make_semigan(const SemiGanConfig& cfg)
{
    cfg.validate();
    const auto hidden = Activation::leaky_relu(cfg.leaky_slope);
    SemiGanModel m;
    m.generator = DenseNet::mlp(cfg.gen_layers, hidden, Activation::tanh());
    m.discriminator = DenseNet::mlp(cfg.disc_layers, hidden, Activation::identity());
    m.generator.init_params(derive_seed(cfg.seed, {1}));
    m.discriminator.init_params(derive_seed(cfg.seed, {2}));
    AdamOptions gen_adam = cfg.adam;
    if (cfg.gen_lr > 0.0) {
        gen_adam.lr = cfg.gen_lr;
    }
    m.gen_opt = AdamState(m.generator.param_count(), gen_adam);
    m.disc_opt = AdamState(m.discriminator.param_count(), cfg.adam);
    return m;
}

// ---------------------------------------------------------------------------
// Probabilities with an implicit zero logit for the fake class.
//
// For logits l_1..l_N:  p_i = e^{l_i} / (1 + sum_k e^{l_k}),  p_fake = 1 / (1 + sum_k e^{l_k}).
// Everything is evaluated after shifting by M = max(0, l_1..l_N).

namespace detail {

struct RowTerms {
    double shift = 0.0;      // M
    double log_denom = 0.0;  // log(e^{-M} + sum_k e^{l_k - M})
    double log_real = 0.0;   // log(1 - p_fake) = logsumexp(l) - M - log_denom
};

inline RowTerms row_terms(std::span<const double> l)
{
    RowTerms t;
    const double lmax = *std::max_element(l.begin(), l.end());
    t.shift = std::max(0.0, lmax);
    double s = std::exp(-t.shift);
    for (double v : l) {
        s += std::exp(v - t.shift);
    }
    t.log_denom = std::log(s);
    double r = 0.0;
    for (double v : l) {
        r += std::exp(v - lmax);
    }
    t.log_real = lmax + std::log(r) - t.shift - t.log_denom;
    return t;
}

inline double clamped_log(double log_p)
{
    static const double floor = std::log(1e-12);
    return std::max(log_p, floor);
}

} // namespace detail

/// Per-row N+1 probabilities: columns 0..N-1 are the real classes, column N is "fake".
inline Batch class_probs(const Batch& logits)
{
    const std::size_t n = logits.cols();
    Batch out(logits.rows(), n + 1);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto l = logits.row(r);
        const auto t = detail::row_terms(l);
        auto p = out.row(r);
        for (std::size_t k = 0; k < n; ++k) {
            p[k] = std::exp(l[k] - t.shift - t.log_denom);
        }
        p[n] = std::exp(-t.shift - t.log_denom);
    }
    return out;
}

/// Loss value and d(loss)/d(logits), already including the 1/m batch average.
struct LogitLoss {
    double loss = 0.0;
    Batch grad;
};

/// Mean of -log p(y = t | x) over the rows.
inline LogitLoss labeled_logit_loss(const Batch& logits, std::span<const int> labels)
{
    const std::size_t m = logits.rows();
    const std::size_t n = logits.cols();
    if (labels.size() != m) {
        throw DimensionError("labeled loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(m) +
                             " rows");
    }
    LogitLoss out{0.0, Batch(m, n)};
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        const int t = labels[r];
        if (t < 0 || static_cast<std::size_t>(t) >= n) {
            throw InputError("labeled loss: label " + std::to_string(t) + " outside 0.." + std::to_string(n - 1));
        }
        const auto l = logits.row(r);
        const auto terms = detail::row_terms(l);
        out.loss -= detail::clamped_log(l[static_cast<std::size_t>(t)] - terms.shift - terms.log_denom);
        auto g = out.grad.row(r);
        for (std::size_t k = 0; k < n; ++k) {
            g[k] = std::exp(l[k] - terms.shift - terms.log_denom) * inv_m;
        }
        g[static_cast<std::size_t>(t)] -= inv_m;
    }
    out.loss *= inv_m;
    return out;
}

/// Mean of -log(1 - p_fake): rows should look real. Used for unlabeled data and,
/// applied to generated rows, as the generator objective.
inline LogitLoss real_logit_loss(const Batch& logits)
{
    const std::size_t m = logits.rows();
    const std::size_t n = logits.cols();
    LogitLoss out{0.0, Batch(m, n)};
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        const auto l = logits.row(r);
        const auto terms = detail::row_terms(l);
        out.loss -= detail::clamped_log(terms.log_real);
        // d/dl_k = p_k - softmax(l)_k
        const double lmax = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (double v : l) {
            z += std::exp(v - lmax);
        }
        auto g = out.grad.row(r);
        for (std::size_t k = 0; k < n; ++k) {
            const double p = std::exp(l[k] - terms.shift - terms.log_denom);
            const double q = std::exp(l[k] - lmax) / z;
            g[k] = (p - q) * inv_m;
        }
    }
    out.loss *= inv_m;
    return out;
}

/// Mean of -log p_fake: rows should be recognised as generated.
inline LogitLoss fake_logit_loss(const Batch& logits)
{
    const std::size_t m = logits.rows();
    const std::size_t n = logits.cols();
    LogitLoss out{0.0, Batch(m, n)};
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        const auto l = logits.row(r);
        const auto terms = detail::row_terms(l);
        out.loss -= detail::clamped_log(-terms.shift - terms.log_denom);
        auto g = out.grad.row(r);
        for (std::size_t k = 0; k < n; ++k) {
            g[k] = std::exp(l[k] - terms.shift - terms.log_denom) * inv_m;
        }
    }
    out.loss *= inv_m;
    return out;
}

// ---------------------------------------------------------------------------
// Network-level losses. Each runs forward + backward and leaves the parameter
// gradients in the network's grads(); nothing is updated.

inline double loss_labeled(DenseNet& disc, const Batch& x, std::span<const int> labels)
{
    auto res = labeled_logit_loss(disc.forward(x), labels);
    disc.backward(res.grad);
    return res.loss;
}

inline double loss_unlabeled(DenseNet& disc, const Batch& x)
{
    auto res = real_logit_loss(disc.forward(x));
    disc.backward(res.grad);
    return res.loss;
}

inline double loss_fake(DenseNet& disc, const Batch& x_fake)
{
    auto res = fake_logit_loss(disc.forward(x_fake));
    disc.backward(res.grad);
    return res.loss;
}

namespace detail {

// Generator loss for rows the generator has just produced (its forward cache is current).
inline double generator_loss_from_cache(SemiGanModel& m, const Batch& fake)
{
    auto res = real_logit_loss(m.discriminator.forward(fake));
    const Batch d_input = m.discriminator.backward(res.grad);
    m.generator.backward(d_input);
    return res.loss;
}

} // namespace detail

/// -mean log(1 - p_fake(G(z))). Gradients reach the generator through the discriminator;
/// the discriminator's grads() are overwritten as a by-product and must not be applied.
inline double loss_generator(SemiGanModel& m, const Batch& z)
{
    const Batch fake = m.generator.forward(z);
    return detail::generator_loss_from_cache(m, fake);
}

/// Row-wise argmax, ties to the lowest index.
inline std::vector<int> argmax_rows(const Batch& scores)
{
    std::vector<int> out(scores.rows());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        const auto s = scores.row(r);
        std::size_t best = 0;
        for (std::size_t k = 1; k < s.size(); ++k) {
            if (s[k] > s[best]) {
                best = k;
            }
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

/// Most probable real class per row. The real-class probabilities share one denominator,
/// so this is the argmax of the logits; the fake class never wins.
inline std::vector<int> classify(DenseNet& disc, const Batch& x) { return argmax_rows(disc.forward(x)); }

inline std::vector<int> classify(SemiGanModel& m, const Batch& x) { return classify(m.discriminator, x); }

inline double accuracy(std::span<const int> predicted, std::span<const int> truth)
{
    if (predicted.size() != truth.size() || truth.empty()) {
        throw InputError("accuracy: need equally sized, nonempty label vectors");
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        hit += predicted[i] == truth[i] ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Training

struct IterationLog {
    std::size_t iteration = 0;
    double l_labeled = 0.0; // means over the iteration's minibatches
    double l_unlabeled = 0.0;
    double l_fake = 0.0;
    double l_generator = 0.0;
    double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

inline void write_training_log(std::ostream& os, std::span<const IterationLog> log)
{
    os << "iteration,l_labeled,l_unlabeled,l_fake,l_generator,val_accuracy\n";
    for (const auto& e : log) {
        os << e.iteration << ',' << detail::format_double(e.l_labeled) << ',' << detail::format_double(e.l_unlabeled)
           << ',' << detail::format_double(e.l_fake) << ',' << detail::format_double(e.l_generator) << ','
           << detail::format_double(e.val_accuracy) << '\n';
    }
}

/// Trains a semi-supervised GAN.
///
/// Every outer iteration shuffles the unlabeled rows and walks them in minibatches of
/// cfg.batch_size (the last one may be shorter). Per minibatch:
///   1. draw standard-normal noise, one row per unlabeled row;
///   2. generate fake rows;
///   3. Adam step on D for the unlabeled loss;
///   4. Adam step on D for the fake loss;
///   5. Adam step on D for the labeled loss over all labeled rows at once;
///   6. Adam step on G for the generator loss, D held fixed.
/// Deterministic given cfg.seed.
inline SemiGanModel train_semigan(const SemiGanConfig& cfg, const Dataset& labeled, const UnlabeledSet& unlabeled,
                                  const Dataset* validation = nullptr, std::vector<IterationLog>* log = nullptr)
{
    cfg.validate();
    labeled.validate();
    if (labeled.rows() == 0) {
        throw InputError("train: labeled set is empty");
    }
    if (!cfg.labeled_only && unlabeled.rows() == 0) {
        throw InputError("train: unlabeled set is empty");
    }
    if (labeled.width() != cfg.feature_count() || (!cfg.labeled_only && unlabeled.features.cols() != cfg.feature_count())) {
        throw DimensionError("train: data width does not match the configured feature count " +
                             std::to_string(cfg.feature_count()));
    }
    for (int t : labeled.labels) {
        if (t < 0 || t >= cfg.n_classes) {
            throw InputError("train: labeled set contains label " + std::to_string(t));
        }
    }

    SemiGanModel m = make_semigan(cfg);
    Rng rng(derive_seed(cfg.seed, {3}));
    std::vector<std::size_t> order(unlabeled.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t iteration = 0;
    auto guarded = [&](int step, auto&& fn) -> double {
        double loss = 0.0;
        try {
            loss = fn();
        } catch (const NumericError& e) {
            throw DivergenceError("iteration " + std::to_string(iteration) + ", step " + std::to_string(step) + ": " +
                                  e.what());
        }
        if (!std::isfinite(loss)) {
            throw DivergenceError("iteration " + std::to_string(iteration) + ", step " + std::to_string(step) +
                                  ": non-finite loss");
        }
        return loss;
    };

    Batch z;
    for (iteration = 0; iteration < cfg.iterations; ++iteration) {
        IterationLog entry;
        entry.iteration = iteration;
        std::size_t n_batches = 0;
        if (cfg.labeled_only) {
            entry.l_labeled = guarded(5, [&] {
                const double l = loss_labeled(m.discriminator, labeled.features, labeled.labels);
                m.disc_opt.apply(m.discriminator.params(), m.discriminator.grads());
                return l;
            });
            n_batches = 1;
        } else {
            rng.shuffle(std::span(order));
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t b = std::min(cfg.batch_size, order.size() - start);
                const Batch xu = unlabeled.features.select_rows(std::span(order).subspan(start, b));

                z.resize(b, cfg.noise_dim);
                for (double& v : z.values()) {
                    v = rng.normal();
                }
                Batch fake;
                guarded(2, [&] {
                    fake = m.generator.forward(z);
                    return 0.0;
                });

                entry.l_unlabeled += guarded(3, [&] {
                    const double l = loss_unlabeled(m.discriminator, xu);
                    m.disc_opt.apply(m.discriminator.params(), m.discriminator.grads());
                    return l;
                });
                entry.l_fake += guarded(4, [&] {
                    const double l = loss_fake(m.discriminator, fake);
                    m.disc_opt.apply(m.discriminator.params(), m.discriminator.grads());
                    return l;
                });
                entry.l_labeled += guarded(5, [&] {
                    const double l = loss_labeled(m.discriminator, labeled.features, labeled.labels);
                    m.disc_opt.apply(m.discriminator.params(), m.discriminator.grads());
                    return l;
                });
                entry.l_generator += guarded(6, [&] {
                    const double l = detail::generator_loss_from_cache(m, fake);
                    m.gen_opt.apply(m.generator.params(), m.generator.grads());
                    return l;
                });
                ++n_batches;
            }
        }
        if (log != nullptr) {
            const double k = n_batches == 0 ? 1.0 : static_cast<double>(n_batches);
            entry.l_labeled /= k;
            entry.l_unlabeled /= k;
            entry.l_fake /= k;
            entry.l_generator /= k;
            if (validation != nullptr && validation->rows() > 0) {
                entry.val_accuracy = accuracy(classify(m, validation->features), validation->labels);
            }
            log->push_back(entry);
        }
    }
    return m;
}

} // namespace fdd
