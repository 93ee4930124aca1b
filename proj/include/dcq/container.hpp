// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcq/entropy.hpp"
#include "dcq/quantizer.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

inline constexpr std::uint16_t kContainerVersion = 1;
/// magic, version, m, H, W, C, b, patch h, patch w, G.
inline constexpr std::size_t kContainerFixedHeaderBytes = 4 + 2 + 4 * 4 + 1 + 2 + 2 + 4;
inline constexpr std::size_t kChecksumBytes = 4;
/// binary32 scale + int16 zero-point.
inline constexpr std::size_t kGroupParamBits = 32 + 16;

/// Everything a compressed dataset file holds.
struct CompressedDataset {
    ImageShape shape;
    std::size_t image_count = 0;
    int bits = 2;
    PatchGeometry geom;
    std::vector<std::uint32_t> labels;
    /// Group id per global patch index.
    std::vector<std::uint32_t> assignments;
    std::vector<QuantParams> group_params;
    /// All group streams concatenated in group order.
    CodedPayload payload;

    std::size_t group_count() const noexcept { return group_params.size(); }
    bool operator==(const CompressedDataset&) const = default;
};

/// Exact bit accounting of a container file. total = header + indices +
/// params + payload, and ceil(total / 8) is the file length; the only
/// unaccounted bits are the (< 8) pad bits closing the index block.
struct StorageBreakdown {
    std::uint64_t size_indices = 0;
    std::uint64_t size_params = 0;
    std::uint64_t size_payload = 0;
    /// Fixed header, labels and checksum.
    std::uint64_t size_header = 0;
    std::uint64_t total = 0;

    std::uint64_t file_bytes() const noexcept { return (total + 7) / 8; }
    bool operator==(const StorageBreakdown&) const = default;
};

/// ceil(log2 G), and 0 for G = 1.
int index_bit_width(std::size_t group_count) noexcept;

StorageBreakdown storage_breakdown(std::size_t patch_total, std::size_t group_count, std::size_t image_count,
                                   std::uint64_t payload_bits);
StorageBreakdown compute_storage(const CompressedDataset& data);

/// Throws InvalidArgument if the dataset is internally inconsistent.
std::vector<std::uint8_t> write_container(const CompressedDataset& data);
/// Throws FormatError (VersionError for other versions) on any malformed input.
CompressedDataset read_container(std::span<const std::uint8_t> bytes);

/// Header-level view of a container; the payload is located but not decoded.
struct ContainerSummary {
    std::uint16_t version = 0;
    ImageShape shape;
    std::size_t image_count = 0;
    int bits = 0;
    PatchGeometry geom;
    std::size_t group_count = 0;
    std::uint64_t payload_bytes = 0;
    StorageBreakdown storage;
    std::uint64_t file_bytes = 0;
};

/// Reads the version first so version mismatches are reported even for
/// otherwise unreadable files; then validates the checksum and layout.
ContainerSummary inspect_container(std::span<const std::uint8_t> bytes);

void save_container(const CompressedDataset& data, const std::string& path);
CompressedDataset load_container(const std::string& path);

}  // namespace dcq
