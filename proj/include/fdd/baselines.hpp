#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fdd/adam.hpp"
#include "fdd/data.hpp"
#include "fdd/error.hpp"
#include "fdd/nn.hpp"
#include "fdd/semigan.hpp"

namespace fdd {

/// Fully supervised classifier trained on the labeled rows only.
struct SupervisedConfig {
    std::vector<std::size_t> hidden = {32, 16};
    int n_classes = kChillerClasses;
    std::size_t epochs = 1000; // full-batch Adam steps
    AdamOptions adam;
    double leaky_slope = 0.2;
    std::uint64_t seed = 0;

    static SupervisedConfig one_layer()
    {
        SupervisedConfig c;
        c.hidden = {32};
        return c;
    }
    static SupervisedConfig two_layer() { return SupervisedConfig{}; }

    std::vector<std::size_t> widths(std::size_t n_features) const
    {
        std::vector<std::size_t> w{n_features};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(static_cast<std::size_t>(n_classes));
        return w;
    }
};

/// Mean N-way softmax cross-entropy and its logit gradient (no fake class).
inline LogitLoss softmax_cross_entropy(const Batch& logits, std::span<const int> labels)
{
    const std::size_t m = logits.rows();
    const std::size_t n = logits.cols();
    if (labels.size() != m) {
        throw DimensionError("cross entropy: label count does not match rows");
    }
    LogitLoss out{0.0, Batch(m, n)};
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        const int t = labels[r];
        if (t < 0 || static_cast<std::size_t>(t) >= n) {
            throw InputError("cross entropy: label " + std::to_string(t) + " out of range");
        }
        const auto l = logits.row(r);
        const double lmax = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (double v : l) {
            z += std::exp(v - lmax);
        }
        const double log_z = lmax + std::log(z);
        out.loss -= detail::clamped_log(l[static_cast<std::size_t>(t)] - log_z);
        auto g = out.grad.row(r);
        for (std::size_t k = 0; k < n; ++k) {
            g[k] = std::exp(l[k] - log_z) * inv_m;
        }
        g[static_cast<std::size_t>(t)] -= inv_m;
    }
    out.loss *= inv_m;
    return out;
}

inline DenseNet train_supervised(const SupervisedConfig& cfg, const Dataset& labeled)
{
    labeled.validate();
    if (labeled.rows() == 0) {
        throw InputError("supervised: labeled set is empty");
    }
    for (int t : labeled.labels) {
        if (t < 0 || t >= cfg.n_classes) {
            throw InputError("supervised: label " + std::to_string(t) + " outside 0.." +
                             std::to_string(cfg.n_classes - 1));
        }
    }
    DenseNet net = DenseNet::mlp(cfg.widths(labeled.width()), Activation::leaky_relu(cfg.leaky_slope),
                                 Activation::identity());
    net.init_params(derive_seed(cfg.seed, {2}));
    AdamState opt(net.param_count(), cfg.adam);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        try {
            auto res = softmax_cross_entropy(net.forward(labeled.features), labeled.labels);
            if (!std::isfinite(res.loss)) {
                throw NumericError("non-finite loss");
            }
            net.backward(res.grad);
            opt.apply(net.params(), net.grads());
        } catch (const NumericError& e) {
            throw DivergenceError("supervised epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }
    return net;
}

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class;         // NaN for classes absent from the test set
    std::vector<std::size_t> class_counts;
    std::vector<double> per_severity;      // index s-1 for severity s; NaN when absent
    std::vector<std::size_t> severity_counts;
};

/// Accuracy overall, per true class, and per severity level (rows with severity only).
inline EvalResult evaluate_predictions(std::span<const int> predicted, const Dataset& test, int n_classes)
{
    if (test.rows() == 0) {
        throw InputError("evaluate: empty test set");
    }
    if (predicted.size() != test.rows()) {
        throw DimensionError("evaluate: prediction count does not match test rows");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EvalResult res;
    std::vector<std::size_t> class_hits(static_cast<std::size_t>(n_classes), 0);
    std::vector<std::size_t> sev_hits(kMaxSeverity, 0);
    res.class_counts.assign(static_cast<std::size_t>(n_classes), 0);
    res.severity_counts.assign(kMaxSeverity, 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const int t = test.labels[i];
        if (t < 0 || t >= n_classes) {
            throw InputError("evaluate: test row " + std::to_string(i) + " lacks a valid label");
        }
        const bool ok = predicted[i] == t;
        hits += ok;
        ++res.class_counts[static_cast<std::size_t>(t)];
        class_hits[static_cast<std::size_t>(t)] += ok;
        const int s = test.severity[i];
        if (s >= 1 && s <= kMaxSeverity) {
            ++res.severity_counts[static_cast<std::size_t>(s - 1)];
            sev_hits[static_cast<std::size_t>(s - 1)] += ok;
        }
    }
    res.accuracy = static_cast<double>(hits) / static_cast<double>(test.rows());
    for (std::size_t c = 0; c < class_hits.size(); ++c) {
        res.per_class.push_back(res.class_counts[c] == 0 ? nan
                                                         : static_cast<double>(class_hits[c]) /
                                                               static_cast<double>(res.class_counts[c]));
    }
    for (std::size_t s = 0; s < sev_hits.size(); ++s) {
        res.per_severity.push_back(res.severity_counts[s] == 0 ? nan
                                                               : static_cast<double>(sev_hits[s]) /
                                                                     static_cast<double>(res.severity_counts[s]));
    }
    return res;
}

/// Evaluates any classifier net (semi-GAN discriminator or supervised baseline).
inline EvalResult evaluate(DenseNet& model, const Dataset& test)
{
    if (test.rows() == 0) {
        throw InputError("evaluate: empty test set");
    }
    return evaluate_predictions(classify(model, test.features), test, static_cast<int>(model.output_width()));
}

} // namespace fdd
