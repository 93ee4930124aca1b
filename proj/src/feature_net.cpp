// SPDX-License-Identifier: Apache-2.0

#include "dcq/feature_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcq/error.hpp"
#include "dcq/random.hpp"

namespace dcq {

Planes to_planes(const ImageTensor& image) {
    Planes p(image.channels(), image.height(), image.width());
    for (std::size_t y = 0; y < image.height(); ++y)
        for (std::size_t x = 0; x < image.width(); ++x)
            for (std::size_t c = 0; c < image.channels(); ++c) p.at(c, y, x) = image.at(y, x, c);
    return p;
}

Conv3x3::Conv3x3(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : in_(in_channels), out_(out_channels), weights_(out_channels * in_channels * 9) {
    const double s = std::sqrt(1.0 / static_cast<double>(in_channels * 9));
    for (auto& w : weights_) w = (2.0 * rng.uniform01() - 1.0) * s;
}

// Output (y, x) reads input (y + ky - 1, x + kx - 1); the loops below clip
// y and x to the range where that index is inside the image.
Planes Conv3x3::forward(const Planes& input) const {
    const std::size_t H = input.height;
    const std::size_t W = input.width;
    Planes out(out_, H, W);
    for (std::size_t oc = 0; oc < out_; ++oc) {
        double* dst = out.plane(oc);
        for (std::size_t ic = 0; ic < in_; ++ic) {
            const double* src = input.plane(ic);
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::size_t y0 = ky == 0 ? 1 : 0;
                const std::size_t y1 = ky == 2 ? H - 1 : H;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double w = weight(oc, ic, ky, kx);
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? W - 1 : W;
                    for (std::size_t y = y0; y < y1; ++y) {
                        double* drow = dst + y * W;
                        const double* srow = src + (y + ky - 1) * W;
                        for (std::size_t x = x0; x < x1; ++x) drow[x] += w * srow[x + kx - 1];
                    }
                }
            }
        }
    }
    return out;
}

Planes Conv3x3::backward_input(const Planes& grad_output) const {
    const std::size_t H = grad_output.height;
    const std::size_t W = grad_output.width;
    Planes grad(in_, H, W);
    for (std::size_t oc = 0; oc < out_; ++oc) {
        const double* gout = grad_output.plane(oc);
        for (std::size_t ic = 0; ic < in_; ++ic) {
            double* gin = grad.plane(ic);
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::size_t y0 = ky == 0 ? 1 : 0;
                const std::size_t y1 = ky == 2 ? H - 1 : H;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double w = weight(oc, ic, ky, kx);
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? W - 1 : W;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* grow = gout + y * W;
                        double* irow = gin + (y + ky - 1) * W;
                        for (std::size_t x = x0; x < x1; ++x) irow[x + kx - 1] += w * grow[x];
                    }
                }
            }
        }
    }
    return grad;
}

FeatureNet::FeatureNet(FeatureNetSpec spec) : spec_(spec) {
    if (spec_.input_channels == 0) throw InvalidArgument("feature net needs at least one input channel");
    Rng rng(spec_.weight_seed);
    std::size_t in = spec_.input_channels;
    for (std::size_t i = 0; i < kFeatureLayers; ++i) {
        layers_.emplace_back(in, kFeatureWidth, rng);
        in = kFeatureWidth;
    }
}

void FeatureNet::check_input(const Planes& input) const {
    if (input.channels != spec_.input_channels)
        throw ShapeError("feature net expects " + std::to_string(spec_.input_channels) + " channels, got " +
                         std::to_string(input.channels));
    if (input.height == 0 || input.width == 0) throw ShapeError("feature net input is empty");
}

FeatureVector FeatureNet::forward(const ImageTensor& image) const { return forward(to_planes(image)); }

FeatureVector FeatureNet::forward(const Planes& input) const { return trace(input).features; }

FeatureNet::Trace FeatureNet::trace(const Planes& input) const {
    check_input(input);
    Trace t;
    Planes act = input;
    for (std::size_t i = 0; i < kFeatureLayers; ++i) {
        t.pre_activation[i] = layers_[i].forward(act);
        act = t.pre_activation[i];
        for (auto& v : act.data) v = std::max(v, 0.0);
    }
    const double area = static_cast<double>(act.height * act.width);
    for (std::size_t c = 0; c < kFeatureWidth; ++c) {
        const double* p = act.plane(c);
        double sum = 0.0;
        for (std::size_t i = 0; i < act.height * act.width; ++i) sum += p[i];
        t.features[c] = sum / area;
    }
    return t;
}

Planes FeatureNet::backward(const Trace& trace, const FeatureVector& grad_features) const {
    const auto& last = trace.pre_activation.back();
    const std::size_t area = last.height * last.width;
    Planes grad(kFeatureWidth, last.height, last.width);
    for (std::size_t c = 0; c < kFeatureWidth; ++c) {
        const double g = grad_features[c] / static_cast<double>(area);
        double* dst = grad.plane(c);
        std::fill(dst, dst + area, g);
    }
    for (std::size_t i = kFeatureLayers; i-- > 0;) {
        const auto& pre = trace.pre_activation[i];
        for (std::size_t k = 0; k < grad.data.size(); ++k)
            if (!(pre.data[k] > 0.0)) grad.data[k] = 0.0;
        grad = layers_[i].backward_input(grad);
    }
    return grad;
}

}  // namespace dcq
