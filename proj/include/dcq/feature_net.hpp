// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcq/tensor.hpp"

namespace dcq {

class Rng;

inline constexpr std::size_t kFeatureWidth = 32;
inline constexpr std::size_t kFeatureLayers = 3;

using FeatureVector = std::array<double, kFeatureWidth>;

/// Channel-major binary64 activations (C planes of H x W).
struct Planes {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    Planes() = default;
    Planes(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
    double* plane(std::size_t c) { return data.data() + c * height * width; }
    const double* plane(std::size_t c) const { return data.data() + c * height * width; }
};

Planes to_planes(const ImageTensor& image);

/// Fixed random feature extractor: three 3x3 convolutions (stride 1, zero
/// padding 1, no bias) of width 32, each followed by a rectifier, then global
/// average pooling.
struct FeatureNetSpec {
    std::size_t input_channels = 3;
    std::uint64_t weight_seed = 42;
};

class Conv3x3 {
public:
    /// Weights uniform in [-s, s], s = sqrt(1 / (in * 9)), drawn in
    /// (out, in, ky, kx) order.
    Conv3x3(std::size_t in_channels, std::size_t out_channels, Rng& rng);

    std::size_t in_channels() const noexcept { return in_; }
    std::size_t out_channels() const noexcept { return out_; }
    double weight(std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx) const {
        return weights_[((oc * in_ + ic) * 3 + ky) * 3 + kx];
    }

    Planes forward(const Planes& input) const;
    /// Gradient w.r.t. the input given the gradient w.r.t. the output.
    Planes backward_input(const Planes& grad_output) const;

private:
    std::size_t in_;
    std::size_t out_;
    std::vector<double> weights_;
};

class FeatureNet {
public:
    /// Intermediate values retained for the backward pass.
    struct Trace {
        std::array<Planes, kFeatureLayers> pre_activation;
        FeatureVector features{};
    };

    explicit FeatureNet(FeatureNetSpec spec = {});

    const FeatureNetSpec& spec() const noexcept { return spec_; }
    const Conv3x3& layer(std::size_t i) const { return layers_.at(i); }

    /// Throws ShapeError when the channel count differs from the spec.
    FeatureVector forward(const ImageTensor& image) const;
    FeatureVector forward(const Planes& input) const;
    Trace trace(const Planes& input) const;
    /// Gradient of a scalar loss w.r.t. the network input, given dL/dfeatures.
    Planes backward(const Trace& trace, const FeatureVector& grad_features) const;

private:
    void check_input(const Planes& input) const;

    FeatureNetSpec spec_;
    std::vector<Conv3x3> layers_;
};

}  // namespace dcq
