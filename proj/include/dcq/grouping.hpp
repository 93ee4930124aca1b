// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dcq/quantizer.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

struct KMeansOptions {
    std::size_t max_iters = 100;
    /// Independent seedings; the lowest final objective wins.
    std::size_t restarts = 4;
    /// When at most this many G-subsets of distinct points exist, Lloyd is
    /// additionally started from each of them.
    std::size_t exhaustive_seeding = 512;
};

/// Per-axis z-score statistics mapping (scale, zero_point) into clustering space.
struct ParamNormalization {
    double scale_mean = 0.0;
    double scale_std = 1.0;
    double zero_mean = 0.0;
    double zero_std = 1.0;

    std::array<double, 2> apply(const QuantParams& p) const noexcept {
        return {(p.scale - scale_mean) / scale_std, (p.zero_point - zero_mean) / zero_std};
    }
};

/// Patch-to-group assignment plus the shared per-group quantization parameters.
///
/// Groups are labelled in order of first appearance along the global patch
/// index, so identical inputs always give identical labels.
struct GroupModel {
    std::size_t group_count = 0;
    std::vector<std::uint32_t> assignments;
    /// Cluster means in normalized space; only used for grouping, never for quantization.
    std::vector<std::array<double, 2>> centroids;
    /// Recalibrated parameters, one per group.
    std::vector<QuantParams> params;
    ParamNormalization normalization;
    /// Objective after every Lloyd iteration of the winning restart.
    std::vector<double> objective_trace;
};

/// Per-group values concatenated in ascending patch order, and their symbols.
struct GroupedValues {
    std::vector<std::vector<float>> flat;
    std::vector<SymbolBlock> symbols;

    std::size_t total_size() const noexcept;
};

ParamNormalization fit_normalization(std::span<const QuantParams> params);

/// Sum of squared distances of each normalized point to its group mean.
double kmeans_objective(std::span<const std::array<double, 2>> points, std::span<const std::uint32_t> assignments,
                        std::size_t group_count);

/// Lloyd's algorithm over z-score normalized (scale, zero_point) with
/// distance-weighted seeding. Nearest-centroid ties go to the lowest group id;
/// an empty cluster takes the point farthest from its own centroid. Stops when
/// no assignment changes or after max_iters. Fills everything but `params`.
/// Throws GroupCountError unless 1 <= G <= params.size().
GroupModel kmeans_group(std::span<const QuantParams> params, std::size_t group_count, std::uint64_t seed,
                        const KMeansOptions& options = {});

/// Calibrates each group over the concatenation of its member patches.
/// Throws InvalidArgument on an empty group or mismatched lengths.
std::vector<QuantParams> recalibrate_groups(std::span<const Patch> patches, std::span<const std::uint32_t> assignments,
                                            std::size_t group_count, int bits);

/// Gathers patch values per group and quantizes each group with its parameters.
GroupedValues quantize_with_groups(std::span<const Patch> patches, std::span<const std::uint32_t> assignments,
                                   std::span<const QuantParams> group_params);

struct GaqResult {
    GroupModel model;
    GroupedValues grouped;
};

/// split -> per-patch calibrate -> k-means -> recalibrate -> group quantize.
GaqResult gaq_quantize(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, std::size_t group_count,
                       std::uint64_t seed, const KMeansOptions& options = {});

/// Number of values each group holds, given the patch layout of m images.
std::vector<std::size_t> group_value_counts(std::span<const std::uint32_t> assignments, std::size_t group_count,
                                            const ImageShape& shape, const PatchGeometry& geom);

/// Inverse of group quantization: dequantizes each group stream and scatters
/// it back to the patches in ascending global index. Throws FormatError when
/// stream lengths disagree with the assignment.
std::vector<ImageTensor> reconstruct_images(std::span<const std::uint32_t> assignments,
                                            std::span<const QuantParams> group_params,
                                            std::span<const std::vector<std::uint8_t>> group_symbols,
                                            const PatchGeometry& geom, const ImageShape& shape, std::size_t image_count);

/// Labels default to zero when not supplied.
DatasetBundle gaq_dequantize(const GroupModel& model, const GroupedValues& grouped, const PatchGeometry& geom,
                             const ImageShape& shape, std::size_t image_count,
                             std::span<const std::uint32_t> labels = {});

}  // namespace dcq
