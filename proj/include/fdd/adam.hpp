#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fdd/error.hpp"

namespace fdd {

struct AdamOptions {
    double lr = 2e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. One state per parameter vector.
class AdamState {
public:
    AdamState() = default;

    AdamState(std::size_t n_params, AdamOptions options)
        : options_(options), m_(n_params, 0.0), v_(n_params, 0.0)
    {
        if (!(options.lr > 0.0) || !(options.beta1 > 0.0 && options.beta1 < 1.0) ||
            !(options.beta2 > 0.0 && options.beta2 < 1.0) || !(options.eps > 0.0)) {
            throw InputError("adam: lr and eps must be positive, betas must lie in (0, 1)");
        }
    }

    const AdamOptions& options() const noexcept { return options_; }
    std::uint64_t step() const noexcept { return step_; }
    std::span<const double> first_moment() const noexcept { return m_; }
    std::span<const double> second_moment() const noexcept { return v_; }

    void apply(std::span<double> params, std::span<const double> grads)
    {
        if (params.size() != m_.size() || grads.size() != m_.size()) {
            throw DimensionError("adam: state holds " + std::to_string(m_.size()) + " moments, got " +
                                 std::to_string(params.size()) + " params and " + std::to_string(grads.size()) +
                                 " grads");
        }
        for (double g : grads) {
            if (!std::isfinite(g)) {
                throw NumericError("adam: non-finite gradient");
            }
        }
        ++step_;
        const double b1 = options_.beta1;
        const double b2 = options_.beta2;
        const double t = static_cast<double>(step_);
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t j = 0; j < params.size(); ++j) {
            const double g = grads[j];
            m_[j] = b1 * m_[j] + (1.0 - b1) * g;
            v_[j] = b2 * v_[j] + (1.0 - b2) * g * g;
            const double m_hat = m_[j] / c1;
            const double v_hat = v_[j] / c2;
            params[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
        }
    }

private:
    AdamOptions options_;
    std::uint64_t step_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

} // namespace fdd
