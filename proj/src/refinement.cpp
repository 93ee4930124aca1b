// SPDX-License-Identifier: Apache-2.0

#include "dcq/refinement.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dcq/error.hpp"
#include "dcq/parallel.hpp"

namespace dcq {
namespace {

/// Quantization parameters for every patch of the provider's layout.
std::vector<QuantParams> provider_params(const ImageTensor& image, const QuantProvider& provider,
                                         std::span<const PatchExtent> layout, int bits) {
    switch (provider.mode) {
    case ProviderMode::PerImage:
        return {calibrate(image.values(), bits)};
    case ProviderMode::PerPatch: {
        std::vector<QuantParams> out;
        out.reserve(layout.size());
        std::vector<float> buf;
        for (const auto& e : layout) {
            buf.clear();
            for (std::size_t r = 0; r < e.rows; ++r)
                for (std::size_t c = 0; c < e.cols; ++c)
                    for (std::size_t ch = 0; ch < image.channels(); ++ch)
                        buf.push_back(image.at(e.origin_row + r, e.origin_col + c, ch));
            out.push_back(calibrate(buf, bits));
        }
        return out;
    }
    case ProviderMode::PerGroup:
        if (provider.frozen.size() != layout.size())
            throw InvalidArgument("frozen provider has " + std::to_string(provider.frozen.size()) +
                                  " parameter sets for " + std::to_string(layout.size()) + " patches");
        return provider.frozen;
    }
    throw InvalidArgument("unknown provider mode");
}

std::vector<PatchExtent> provider_layout(const ImageShape& shape, const QuantProvider& provider) {
    if (provider.mode == ProviderMode::PerImage) return {{0, 0, shape.height, shape.width}};
    return patch_layout(shape, provider.geom);
}

double pixel_mse(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

}  // namespace

FakeQuantResult fake_quant_with_mask(const ImageTensor& image, const QuantProvider& provider, int bits) {
    check_bits(bits);
    const auto layout = provider_layout(image.shape(), provider);
    const auto params = provider_params(image, provider, layout, bits);
    FakeQuantResult out{image, std::vector<std::uint8_t>(image.size(), 0)};
    const std::size_t C = image.channels();
    for (std::size_t p = 0; p < layout.size(); ++p) {
        const auto& e = layout[p];
        for (std::size_t r = 0; r < e.rows; ++r) {
            for (std::size_t c = 0; c < e.cols; ++c) {
                for (std::size_t ch = 0; ch < C; ++ch) {
                    const std::size_t idx = ((e.origin_row + r) * image.width() + e.origin_col + c) * C + ch;
                    const float v = image.values()[idx];
                    out.image.values()[idx] = dequantize_value(quantize_value(v, params[p]), params[p]);
                    out.pass_through[idx] = in_quant_range(v, params[p]) ? 1 : 0;
                }
            }
        }
    }
    return out;
}

ImageTensor fake_quant(const ImageTensor& image, const QuantProvider& provider, int bits) {
    return fake_quant_with_mask(image, provider, bits).image;
}

double feature_loss(const FeatureNet& net, const FeatureVector& target, const Planes& input) {
    const auto f = net.forward(input);
    double loss = 0.0;
    for (std::size_t k = 0; k < kFeatureWidth; ++k) loss += (f[k] - target[k]) * (f[k] - target[k]);
    return loss;
}

Planes feature_loss_gradient(const FeatureNet& net, const FeatureVector& target, const Planes& input, double* loss) {
    const auto t = net.trace(input);
    FeatureVector grad{};
    double l = 0.0;
    for (std::size_t k = 0; k < kFeatureWidth; ++k) {
        const double d = t.features[k] - target[k];
        l += d * d;
        grad[k] = 2.0 * d;
    }
    if (loss) *loss = l;
    return net.backward(t, grad);
}

std::pair<ImageTensor, RefineReport> refine_image(const ImageTensor& image, std::size_t image_index,
                                                  const FeatureNet& net, const RefineConfig& config,
                                                  const QuantProvider& provider) {
    if (config.iterations == 0) throw InvalidArgument("refinement needs at least one iteration");
    if (!(config.step_size > 0.0)) throw InvalidArgument("refinement step size must be positive");

    const std::size_t H = image.height();
    const std::size_t W = image.width();
    const std::size_t C = image.channels();
    const FeatureVector target = net.forward(image);

    ImageTensor x = image;
    ImageTensor best = image;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> m1(image.size(), 0.0);
    std::vector<double> m2(image.size(), 0.0);
    RefineReport report;

    for (std::size_t it = 0; it <= config.iterations; ++it) {
        const auto fq = fake_quant_with_mask(x, provider, config.bits);
        double loss = 0.0;
        const Planes grad = feature_loss_gradient(net, target, to_planes(fq.image), &loss);
        if (!std::isfinite(loss)) throw DivergenceError(image_index);
        report.loss_trajectory.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best = x;
            report.best_iteration = it;
        }
        if (it == config.iterations || loss == 0.0) break;

        const double t = static_cast<double>(it + 1);
        const double c1 = 1.0 - std::pow(config.beta1, t);
        const double c2 = 1.0 - std::pow(config.beta2, t);
        auto xs = x.values();
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t xx = 0; xx < W; ++xx) {
                for (std::size_t ch = 0; ch < C; ++ch) {
                    const std::size_t idx = (y * W + xx) * C + ch;
                    const double g = fq.pass_through[idx] ? grad.at(ch, y, xx) : 0.0;
                    m1[idx] = config.beta1 * m1[idx] + (1.0 - config.beta1) * g;
                    m2[idx] = config.beta2 * m2[idx] + (1.0 - config.beta2) * g * g;
                    const double step = config.step_size * (m1[idx] / c1) / (std::sqrt(m2[idx] / c2) + config.epsilon);
                    xs[idx] = static_cast<float>(static_cast<double>(xs[idx]) - step);
                }
            }
        }
    }

    report.initial_loss = report.loss_trajectory.front();
    report.final_loss = best_loss;
    report.initial_pixel_mse = pixel_mse(fake_quant(image, provider, config.bits).values(), image.values());
    report.final_pixel_mse = pixel_mse(fake_quant(best, provider, config.bits).values(), image.values());
    return {std::move(best), std::move(report)};
}

RefineOutcome refine_images(const DatasetBundle& bundle, const FeatureNet& net, const RefineConfig& config,
                            std::span<const QuantProvider> providers) {
    const std::size_t m = bundle.size();
    std::vector<QuantProvider> own;
    if (providers.empty()) {
        switch (config.provider) {
        case ProviderMode::PerImage:
            own.push_back(QuantProvider::per_image());
            break;
        case ProviderMode::PerPatch:
            own.push_back(QuantProvider::per_patch(config.geom));
            break;
        case ProviderMode::PerGroup:
            throw InvalidArgument("per-group refinement needs frozen providers");
        }
        providers = own;
    }
    if (providers.size() != 1 && providers.size() != m)
        throw InvalidArgument("provider count must be 1 or the image count");

    std::vector<ImageTensor> images(m);
    std::vector<RefineReport> reports(m);
    parallel_for(m, [&](std::size_t i) {
        const auto& provider = providers.size() == 1 ? providers[0] : providers[i];
        auto [img, rep] = refine_image(bundle.images()[i], i, net, config, provider);
        images[i] = std::move(img);
        reports[i] = std::move(rep);
    });
    return {DatasetBundle(std::move(images), bundle.labels()), std::move(reports)};
}

std::vector<QuantParams> group_params_for_image(const GroupModel& model, std::size_t image_index,
                                                std::size_t patches_per_image) {
    std::vector<QuantParams> out;
    out.reserve(patches_per_image);
    for (std::size_t p = 0; p < patches_per_image; ++p)
        out.push_back(model.params.at(model.assignments.at(image_index * patches_per_image + p)));
    return out;
}

ScheduleOutcome refine_schedule(const DatasetBundle& bundle, const FeatureNet& net, const ScheduleConfig& config) {
    ScheduleOutcome out{bundle, std::nullopt, {}, {}};
    const bool before = config.stage != RefineStage::AfterGrouping;
    const bool after = config.stage != RefineStage::BeforeGrouping && config.after.iterations > 0;

    if (before) {
        RefineConfig cfg = config.before;
        cfg.bits = config.bits;
        cfg.geom = config.geom;
        cfg.provider = ProviderMode::PerPatch;
        auto refined = refine_images(out.bundle, net, cfg);
        out.bundle = std::move(refined.bundle);
        out.before_reports = std::move(refined.reports);
    }
    if (after) {
        auto gaq = gaq_quantize(out.bundle, config.geom, config.bits, config.group_count, config.seed, config.kmeans);
        const std::size_t P = config.geom.patch_count(out.bundle.shape());
        std::vector<QuantProvider> providers;
        providers.reserve(out.bundle.size());
        for (std::size_t i = 0; i < out.bundle.size(); ++i)
            providers.push_back(QuantProvider::per_group(config.geom, group_params_for_image(gaq.model, i, P)));
        RefineConfig cfg = config.after;
        cfg.bits = config.bits;
        cfg.geom = config.geom;
        cfg.provider = ProviderMode::PerGroup;
        auto refined = refine_images(out.bundle, net, cfg, providers);
        out.bundle = std::move(refined.bundle);
        out.after_reports = std::move(refined.reports);
        out.frozen_model = std::move(gaq.model);
    }
    return out;
}

}  // namespace dcq
