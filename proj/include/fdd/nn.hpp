#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fdd/batch.hpp"
#include "fdd/error.hpp"
#include "fdd/rng.hpp"

namespace fdd {

enum class ActivationKind { Identity, Tanh, LeakyRelu };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double slope = 0.0; // LeakyRelu only

    static constexpr Activation identity() noexcept { return {ActivationKind::Identity, 0.0}; }
    static constexpr Activation tanh() noexcept { return {ActivationKind::Tanh, 0.0}; }
    static Activation leaky_relu(double slope)
    {
        if (!(slope > 0.0 && slope < 1.0)) {
            throw InputError("leaky relu slope must lie in (0, 1), got " + std::to_string(slope));
        }
        return {ActivationKind::LeakyRelu, slope};
    }

    friend bool operator==(const Activation&, const Activation&) = default;
};

struct LayerSpec {
    std::size_t input_width = 0;
    std::size_t output_width = 0;
    Activation activation;

    std::size_t weight_count() const noexcept { return input_width * output_width; }
    std::size_t param_count() const noexcept { return weight_count() + output_width; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Stack of affine layers with elementwise activations.
///
/// Parameters live in one flat vector, layer after layer; within a layer the
/// weight matrix (input_width x output_width, row-major) precedes the bias.
/// forward() caches what backward() needs, so an instance must not be shared
/// between threads while training.
class DenseNet {
public:
    DenseNet() = default;

    explicit DenseNet(std::vector<LayerSpec> layers) : layers_(std::move(layers))
    {
        if (layers_.empty()) {
            throw DimensionError("dense net needs at least one layer");
        }
        std::size_t total = 0;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.input_width == 0 || l.output_width == 0) {
                throw DimensionError("layer " + std::to_string(i) + " has zero width");
            }
            if (l.activation.kind == ActivationKind::LeakyRelu &&
                !(l.activation.slope > 0.0 && l.activation.slope < 1.0)) {
                throw InputError("layer " + std::to_string(i) + ": leaky relu slope outside (0, 1)");
            }
            if (i > 0 && layers_[i - 1].output_width != l.input_width) {
                throw DimensionError("layer " + std::to_string(i) + " expects width " +
                                     std::to_string(l.input_width) + " but previous layer emits " +
                                     std::to_string(layers_[i - 1].output_width));
            }
            offsets_.push_back(total);
            total += l.param_count();
        }
        params_.assign(total, 0.0);
        grads_.assign(total, 0.0);
        acts_.resize(layers_.size() + 1);
        pre_.resize(layers_.size());
    }

    /// Builds widths[0] -> widths[1] -> ... with `hidden` between layers and `output` on the last.
    static DenseNet mlp(std::span<const std::size_t> widths, Activation hidden, Activation output)
    {
        if (widths.size() < 2) {
            throw DimensionError("mlp needs at least an input and an output width");
        }
        std::vector<LayerSpec> layers;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            const bool last = i + 2 == widths.size();
            layers.push_back({widths[i], widths[i + 1], last ? output : hidden});
        }
        return DenseNet(std::move(layers));
    }

    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    std::size_t input_width() const noexcept { return layers_.front().input_width; }
    std::size_t output_width() const noexcept { return layers_.back().output_width; }
    std::size_t param_count() const noexcept { return params_.size(); }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> grads() noexcept { return grads_; }
    std::span<const double> grads() const noexcept { return grads_; }

    std::span<double> weights(std::size_t layer) noexcept
    {
        return {params_.data() + offsets_[layer], layers_[layer].weight_count()};
    }
    std::span<double> bias(std::size_t layer) noexcept
    {
        return {params_.data() + offsets_[layer] + layers_[layer].weight_count(), layers_[layer].output_width};
    }

    /// Glorot-uniform weights in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases.
    void init_params(std::uint64_t seed)
    {
        Rng rng(seed);
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& l = layers_[li];
            const double a = std::sqrt(6.0 / static_cast<double>(l.input_width + l.output_width));
            for (double& w : weights(li)) {
                w = a * (2.0 * rng.uniform() - 1.0);
            }
            for (double& b : bias(li)) {
                b = 0.0;
            }
        }
        has_forward_ = false;
    }

    /// Evaluates the net on every row. The returned reference stays valid until the next forward().
    const Batch& forward(const Batch& input)
    {
        if (input.cols() != input_width()) {
            throw DimensionError("forward: input width " + std::to_string(input.cols()) + ", net expects " +
                                 std::to_string(input_width()));
        }
        acts_[0] = input;
        const std::size_t rows = input.rows();
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const auto& l = layers_[li];
            const std::size_t in = l.input_width;
            const std::size_t out = l.output_width;
            const double* w = params_.data() + offsets_[li];
            const double* b = w + l.weight_count();
            const Batch& x = acts_[li];
            Batch& z = pre_[li];
            z.resize(rows, out);
            for (std::size_t r = 0; r < rows; ++r) {
                double* zr = z.row(r).data();
                const double* xr = x.row(r).data();
                for (std::size_t o = 0; o < out; ++o) {
                    zr[o] = b[o];
                }
                for (std::size_t i = 0; i < in; ++i) {
                    const double xi = xr[i];
                    const double* wi = w + i * out;
                    for (std::size_t o = 0; o < out; ++o) {
                        zr[o] += xi * wi[o];
                    }
                }
            }
            Batch& y = acts_[li + 1];
            y.resize(rows, out);
            activate(l.activation, z.values(), y.values());
        }
        const Batch& output = acts_.back();
        if (!output.all_finite()) {
            throw NumericError("forward: non-finite network output");
        }
        has_forward_ = true;
        return output;
    }

    /// Back-propagates d(loss)/d(output) from the most recent forward().
    ///
    /// Overwrites grads() with d(loss)/d(params) summed over rows (no averaging)
    /// and returns d(loss)/d(input).
    Batch backward(const Batch& output_grad)
    {
        if (!has_forward_) {
            throw StateError("backward called without a preceding forward");
        }
        const std::size_t rows = acts_[0].rows();
        if (output_grad.rows() != rows || output_grad.cols() != output_width()) {
            throw DimensionError("backward: output gradient is " + std::to_string(output_grad.rows()) + "x" +
                                 std::to_string(output_grad.cols()) + ", last forward produced " +
                                 std::to_string(rows) + "x" + std::to_string(output_width()));
        }
        Batch delta = output_grad;
        Batch dx;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const auto& l = layers_[li];
            const std::size_t in = l.input_width;
            const std::size_t out = l.output_width;
            // delta becomes d(loss)/d(pre-activation)
            activation_grad(l.activation, pre_[li].values(), acts_[li + 1].values(), delta.values());

            const double* w = params_.data() + offsets_[li];
            double* gw = grads_.data() + offsets_[li];
            double* gb = gw + l.weight_count();
            std::fill(gw, gw + l.param_count(), 0.0);
            const Batch& x = acts_[li];
            dx.resize(rows, in);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dr = delta.row(r).data();
                const double* xr = x.row(r).data();
                double* dxr = dx.row(r).data();
                for (std::size_t o = 0; o < out; ++o) {
                    gb[o] += dr[o];
                }
                for (std::size_t i = 0; i < in; ++i) {
                    const double xi = xr[i];
                    const double* wi = w + i * out;
                    double* gwi = gw + i * out;
                    double acc = 0.0;
                    for (std::size_t o = 0; o < out; ++o) {
                        gwi[o] += xi * dr[o];
                        acc += dr[o] * wi[o];
                    }
                    dxr[i] = acc;
                }
            }
            std::swap(delta, dx);
        }
        return delta;
    }

    void save(std::ostream& os) const
    {
        os << "fdd-densenet " << kFormatVersion << '\n';
        os << "layers " << layers_.size() << '\n';
        char buf[64];
        for (const auto& l : layers_) {
            os << l.input_width << ' ' << l.output_width << ' ' << activation_name(l.activation.kind);
            if (l.activation.kind == ActivationKind::LeakyRelu) {
                std::snprintf(buf, sizeof buf, "%.17g", l.activation.slope);
                os << ' ' << buf;
            }
            os << '\n';
        }
        os << "params " << params_.size() << '\n';
        for (double p : params_) {
            std::snprintf(buf, sizeof buf, "%.17g", p);
            os << buf << '\n';
        }
    }

    static DenseNet load(std::istream& is)
    {
        std::string tag;
        int version = 0;
        if (!(is >> tag >> version) || tag != "fdd-densenet") {
            throw InputError("model: missing fdd-densenet header");
        }
        if (version != kFormatVersion) {
            throw InputError("model: unsupported format version " + std::to_string(version));
        }
        std::size_t n_layers = 0;
        if (!(is >> tag >> n_layers) || tag != "layers") {
            throw InputError("model: expected layer count");
        }
        std::vector<LayerSpec> layers;
        for (std::size_t i = 0; i < n_layers; ++i) {
            LayerSpec l;
            std::string act;
            if (!(is >> l.input_width >> l.output_width >> act)) {
                throw InputError("model: truncated layer " + std::to_string(i));
            }
            if (act == "identity") {
                l.activation = Activation::identity();
            } else if (act == "tanh") {
                l.activation = Activation::tanh();
            } else if (act == "leaky_relu") {
                std::string slope;
                is >> slope;
                l.activation = Activation::leaky_relu(std::stod(slope));
            } else {
                throw InputError("model: unknown activation '" + act + "'");
            }
            layers.push_back(l);
        }
        DenseNet net(std::move(layers));
        std::size_t n_params = 0;
        if (!(is >> tag >> n_params) || tag != "params" || n_params != net.param_count()) {
            throw InputError("model: parameter count does not match layer specs");
        }
        std::string token;
        for (double& p : net.params_) {
            if (!(is >> token)) {
                throw InputError("model: truncated parameter list");
            }
            p = std::stod(token);
        }
        return net;
    }

    static constexpr int kFormatVersion = 1;

private:
    static const char* activation_name(ActivationKind k) noexcept
    {
        switch (k) {
        case ActivationKind::Identity: return "identity";
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::LeakyRelu: return "leaky_relu";
        }
        return "identity";
    }

    static void activate(Activation a, std::span<const double> z, std::span<double> y) noexcept
    {
        switch (a.kind) {
        case ActivationKind::Identity:
            std::copy(z.begin(), z.end(), y.begin());
            break;
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < z.size(); ++i) {
                y[i] = std::tanh(z[i]);
            }
            break;
        case ActivationKind::LeakyRelu:
            for (std::size_t i = 0; i < z.size(); ++i) {
                y[i] = z[i] > 0.0 ? z[i] : a.slope * z[i];
            }
            break;
        }
    }

    static void activation_grad(Activation a, std::span<const double> z, std::span<const double> y,
                                std::span<double> delta) noexcept
    {
        switch (a.kind) {
        case ActivationKind::Identity:
            break;
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < z.size(); ++i) {
                delta[i] *= 1.0 - y[i] * y[i];
            }
            break;
        case ActivationKind::LeakyRelu:
            for (std::size_t i = 0; i < z.size(); ++i) {
                if (!(z[i] > 0.0)) {
                    delta[i] *= a.slope;
                }
            }
            break;
        }
    }

    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    std::vector<double> grads_;
    std::vector<Batch> acts_; // acts_[i] is the input of layer i; acts_.back() is the output
    std::vector<Batch> pre_;
    bool has_forward_ = false;
};

} // namespace fdd
