// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dcq/feature_net.hpp"
#include "dcq/grouping.hpp"
#include "dcq/quantizer.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

enum class ProviderMode { PerImage, PerPatch, PerGroup };

/// Where the quantization parameters used for fake quantization come from.
/// PerImage and PerPatch calibrate on the current image; PerGroup uses
/// frozen parameters, one per patch of `geom`.
struct QuantProvider {
    ProviderMode mode = ProviderMode::PerImage;
    PatchGeometry geom{};
    std::vector<QuantParams> frozen;

    static QuantProvider per_image() { return {}; }
    static QuantProvider per_patch(const PatchGeometry& geom) { return {ProviderMode::PerPatch, geom, {}}; }
    static QuantProvider per_group(const PatchGeometry& geom, std::vector<QuantParams> patch_params) {
        return {ProviderMode::PerGroup, geom, std::move(patch_params)};
    }
};

/// Fake-quantized image plus the straight-through mask (1 where the value was
/// not clamped).
struct FakeQuantResult {
    ImageTensor image;
    std::vector<std::uint8_t> pass_through;
};

FakeQuantResult fake_quant_with_mask(const ImageTensor& image, const QuantProvider& provider, int bits);
ImageTensor fake_quant(const ImageTensor& image, const QuantProvider& provider, int bits);

/// ||target - f(input)||^2.
double feature_loss(const FeatureNet& net, const FeatureVector& target, const Planes& input);
/// Gradient of feature_loss w.r.t. input; optionally reports the loss.
Planes feature_loss_gradient(const FeatureNet& net, const FeatureVector& target, const Planes& input,
                             double* loss = nullptr);

struct RefineConfig {
    std::size_t iterations = 500;
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int bits = 2;
    ProviderMode provider = ProviderMode::PerPatch;
    PatchGeometry geom{};
};

struct RefineReport {
    /// Loss at every evaluated iterate, starting with the unrefined image.
    std::vector<double> loss_trajectory;
    double initial_loss = 0.0;
    /// Loss of the returned image; never above initial_loss.
    double final_loss = 0.0;
    std::size_t best_iteration = 0;
    double initial_pixel_mse = 0.0;
    double final_pixel_mse = 0.0;
};

struct RefineOutcome {
    DatasetBundle bundle;
    std::vector<RefineReport> reports;
};

/// Minimizes ||f(x) - f(fake_quant(x_ft))||^2 over x_ft, starting at x, with
/// Adam and straight-through gradients. Parameters from PerImage/PerPatch
/// providers are recalibrated on x_ft every step and held constant inside it.
/// Returns the lowest-loss iterate, which is x itself when nothing improved.
/// Throws DivergenceError(image_index) on a non-finite loss.
std::pair<ImageTensor, RefineReport> refine_image(const ImageTensor& image, std::size_t image_index,
                                                  const FeatureNet& net, const RefineConfig& config,
                                                  const QuantProvider& provider);

/// Refines every image independently. `providers` holds either one provider
/// shared by all images or one per image; when empty one is built from config.
RefineOutcome refine_images(const DatasetBundle& bundle, const FeatureNet& net, const RefineConfig& config,
                            std::span<const QuantProvider> providers = {});

enum class RefineStage { BeforeGrouping, AfterGrouping, Both };

struct ScheduleConfig {
    RefineStage stage = RefineStage::BeforeGrouping;
    RefineConfig before;
    /// Used by AfterGrouping and Both; zero iterations disables the post stage.
    RefineConfig after;
    PatchGeometry geom{};
    int bits = 2;
    std::size_t group_count = 1;
    std::uint64_t seed = 0;
    KMeansOptions kmeans{};
};

struct ScheduleOutcome {
    DatasetBundle bundle;
    /// Grouping the post stage refined against; the caller must quantize with
    /// it unchanged so stored indices stay valid.
    std::optional<GroupModel> frozen_model;
    std::vector<RefineReport> before_reports;
    std::vector<RefineReport> after_reports;
};

/// BeforeGrouping refines with per-patch parameters; AfterGrouping groups the
/// input first and refines against the frozen group parameters; Both chains them.
ScheduleOutcome refine_schedule(const DatasetBundle& bundle, const FeatureNet& net, const ScheduleConfig& config);

/// Per-patch view of a group model for one image: params[assignment] in patch order.
std::vector<QuantParams> group_params_for_image(const GroupModel& model, std::size_t image_index,
                                                std::size_t patches_per_image);

}  // namespace dcq
