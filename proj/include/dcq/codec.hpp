// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dcq/container.hpp"
#include "dcq/feature_net.hpp"
#include "dcq/grouping.hpp"
#include "dcq/refinement.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

/// Storage budget in bits. The IPC form charges 32 bits per value of n
/// full-precision images.
struct BudgetSpec {
    std::uint64_t budget_bits = 0;

    static BudgetSpec ipc(std::uint64_t images, const ImageShape& shape);
    static BudgetSpec from_bits(std::uint64_t bits);

    std::uint64_t budget_bytes() const noexcept { return budget_bits / 8; }
};

/// One fully encoded grouping at a fixed group count.
struct Candidate {
    std::size_t group_count = 0;
    GroupModel model;
    CompressedDataset dataset;
    /// Storage with the entropy coded payload (the real file).
    StorageBreakdown storage;
    /// Storage if the payload were stored as plain b-bit packing.
    StorageBreakdown raw_storage;
};

/// Group, recalibrate, quantize and entropy-code `bundle` at G groups.
Candidate encode_candidate(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, std::size_t group_count,
                           std::uint64_t seed, const KMeansOptions& kmeans = {});

/// Encodes bundle with an existing grouping instead of re-clustering.
Candidate encode_with_model(const DatasetBundle& bundle, const PatchGeometry& geom, int bits, const GroupModel& model);

struct SolverOptions {
    /// When false, feasibility is judged on raw b-bit packing instead of the coded payload.
    bool entropy_coding = true;
    /// After bisection, every G up to this far past the best feasible one is
    /// also tried; a feasible hit moves the window.
    std::size_t upward_probe = 16;
    KMeansOptions kmeans{};
};

struct SolveResult {
    std::size_t group_count = 0;
    Candidate best;
    /// (G, accounted total bits) for every evaluated G, in evaluation order.
    std::vector<std::pair<std::size_t, std::uint64_t>> evaluated;
};

/// Largest feasible group count: evaluates G = 1, 2, 4, ... (and P*m) until
/// one exceeds the budget, bisects between the last feasible and the first
/// infeasible grid point, then probes upward (SolverOptions::upward_probe).
/// The result G satisfies feasible(G) and either G = P*m or !feasible(G + 1).
/// Throws InfeasibleBudget when G = 1 does not fit.
SolveResult solve_group_count(const DatasetBundle& bundle, const PatchGeometry& geom, int bits,
                              const BudgetSpec& budget, std::uint64_t seed, const SolverOptions& options = {});

struct CompressOptions {
    PatchGeometry geom{};
    int bits = 2;
    BudgetSpec budget{};
    std::uint64_t seed = 0;
    KMeansOptions kmeans{};
    /// No refinement when empty.
    std::optional<RefineStage> refine;
    RefineConfig refine_before{};
    RefineConfig refine_after{};
    FeatureNetSpec feature_net{};
};

struct CompressResult {
    std::vector<std::uint8_t> bytes;
    CompressedDataset dataset;
    StorageBreakdown storage;
    /// Images that were quantized (refined when refinement ran).
    DatasetBundle encoded_input;
    std::vector<RefineReport> before_reports;
    std::vector<RefineReport> after_reports;
};

/// Optional refinement, group-count search, group quantization, entropy
/// coding and serialization. The file never exceeds the budget.
CompressResult compress(const DatasetBundle& bundle, const CompressOptions& options);

/// Decodes a container produced by compress back to dequantized images.
DatasetBundle decompress(const CompressedDataset& data);
DatasetBundle decompress(std::span<const std::uint8_t> bytes);

}  // namespace dcq
