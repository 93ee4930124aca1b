// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dcq/codec.hpp"
#include "dcq/feature_net.hpp"
#include "dcq/grouping.hpp"
#include "dcq/refinement.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

struct DistortionReport {
    /// Mean squared error over every value of the bundle.
    double pixel_mse = 0.0;
    /// Mean over images of ||f(x) - f(x_hat)||^2; NaN when not measured.
    double feature_mse = 0.0;
    std::vector<double> image_pixel_mse;
    /// Empty when feature distortion was not measured.
    std::vector<double> image_feature_mse;
};

/// Throws ShapeError when the bundles are not aligned. Feature distortion is
/// skipped (NaN) when `features` is empty.
DistortionReport measure_distortion(const DatasetBundle& original, const DatasetBundle& reconstructed,
                                    const std::optional<FeatureNetSpec>& features = FeatureNetSpec{});

enum class Method { WholeAQ, MedianCut, PAQ, GAQ };

std::string_view method_name(Method m) noexcept;
/// Throws InvalidArgument on an unknown name.
Method parse_method(std::string_view name);

struct SweepRow {
    std::string method;
    int bits = 0;
    /// Number of stored parameter sets (palettes for Median Cut).
    std::size_t groups = 0;
    double pixel_mse = 0.0;
    double feature_mse = 0.0;
    std::uint64_t size_indices_bits = 0;
    std::uint64_t size_params_bits = 0;
    std::uint64_t size_payload_bits = 0;
    std::uint64_t total_bits = 0;
    /// total_bits with the payload stored as plain b-bit packing.
    std::uint64_t raw_total_bits = 0;
};

struct SweepOptions {
    PatchGeometry geom{};
    std::uint64_t seed = 0;
    KMeansOptions kmeans{};
    /// Feature distortion is skipped when empty.
    std::optional<FeatureNetSpec> features = FeatureNetSpec{};
};

/// Reconstructs the bundle with `method` at `bits` and accounts its storage
/// in the same units as the container (header, parameters, indices, coded
/// payload). `groups` is only used by GAQ and is capped at P*m.
SweepRow run_method(const DatasetBundle& bundle, Method method, int bits, std::size_t groups,
                    const SweepOptions& options);

/// One row per (method, bits), methods in the given order, bits ascending.
std::vector<SweepRow> sweep_bitwidth(const DatasetBundle& bundle, const std::vector<Method>& methods,
                                     std::vector<int> bits, std::size_t groups, const SweepOptions& options);

/// GAQ rows for each G in the given order (values above P*m are capped).
std::vector<SweepRow> sweep_groups(const DatasetBundle& bundle, int bits, const std::vector<std::size_t>& groups,
                                   const SweepOptions& options);

/// Powers of two up to P*m, plus P*m itself.
std::vector<std::size_t> doubling_ladder(std::size_t patch_total);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct AblationToggles {
    bool gaq = false;
    bool refine = false;
    bool entropy_coding = false;
};

struct AblationRow {
    AblationToggles toggles;
    /// Largest prefix of the bundle that fits the budget; 0 when none does.
    std::size_t images_fit = 0;
    std::size_t groups = 0;
    double pixel_mse = 0.0;
    double feature_mse = 0.0;
    std::uint64_t total_bits = 0;
};

struct AblationOptions {
    PatchGeometry geom{};
    int bits = 2;
    std::uint64_t seed = 0;
    KMeansOptions kmeans{};
    /// Refinement runs before grouping with per-patch parameters.
    RefineConfig refine{};
    std::optional<FeatureNetSpec> features = FeatureNetSpec{};
};

/// With GAQ off every fit uses one global parameter set (G = 1); with it on
/// the solver picks G for the fitted prefix. EC off accounts the payload as
/// plain b-bit packing. Distortion is always measured against the unrefined
/// input prefix.
AblationRow ablation_run(const DatasetBundle& bundle, const AblationToggles& toggles, const BudgetSpec& budget,
                         const AblationOptions& options);

/// All eight toggle combinations, ordered (gaq, refine, ec) as binary counters.
std::vector<AblationToggles> all_ablation_toggles();

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace dcq
