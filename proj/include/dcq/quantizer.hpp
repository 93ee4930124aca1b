// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dcq/tensor.hpp"

namespace dcq {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;
/// Lower bound on any calibrated scale.
inline constexpr float kScaleEpsilon = 1e-8f;
/// Calibration never produces |z| above this, so zero-points fit in an int16.
inline constexpr float kZeroPointLimit = 30000.0f;

/// Affine quantization mapping: symbol = clamp(round(v / scale + zero_point), 0, 2^bits - 1).
struct QuantParams {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    int bits = kMinBits;

    std::uint32_t qmax() const noexcept { return (1u << bits) - 1u; }
    bool operator==(const QuantParams&) const = default;
};

/// Quantized symbols with the mapping that produced them.
struct SymbolBlock {
    std::vector<std::uint8_t> symbols;
    QuantParams params;

    std::size_t size() const noexcept { return symbols.size(); }
};

/// Throws InvalidArgument unless bits is in [kMinBits, kMaxBits].
void check_bits(int bits);

/// Round half away from zero.
float round_half_away(float x) noexcept;

/// Exact min/max calibration of scale and zero-point over `values`.
///
/// A zero range reconstructs the constant exactly (scale = max(|v|, eps)).
/// Otherwise scale = (max - min) / (2^b - 1), floored at eps and at
/// |min| / kZeroPointLimit, and zero_point = round(-min / scale).
/// All arithmetic is binary32. Throws CalibrationError on empty input.
QuantParams calibrate(std::span<const float> values, int bits);

std::uint8_t quantize_value(float v, const QuantParams& params) noexcept;
float dequantize_value(std::uint8_t symbol, const QuantParams& params) noexcept;

/// Whether v falls inside the unclamped quantization range; the straight-through
/// estimator passes gradients only there.
bool in_quant_range(float v, const QuantParams& params) noexcept;

SymbolBlock quantize(std::span<const float> values, const QuantParams& params);
std::vector<float> dequantize(const SymbolBlock& block);

/// quantize followed by dequantize.
std::vector<float> fake_quantize(std::span<const float> values, const QuantParams& params);

/// One parameter pair over all H*W*C values of the image.
SymbolBlock quantize_whole_image(const ImageTensor& image, int bits);

/// Independent parameters per patch, in split_patches order.
std::vector<SymbolBlock> quantize_patches(const ImageTensor& image, const PatchGeometry& geom, int bits);

/// Palette produced by Median Cut colour quantization.
struct MedianCutResult {
    std::size_t channels = 0;
    int bits = 1;
    /// Bucket mean colours, palette_size() x channels.
    std::vector<float> palette;
    /// Palette index per pixel, row-major.
    std::vector<std::uint8_t> indices;

    std::size_t palette_size() const noexcept { return channels == 0 ? 0 : palette.size() / channels; }
    ImageTensor reconstruct(const ImageShape& shape) const;
};

/// Recursive median split of the pixel set for `bits` levels (1..8).
///
/// Each level splits every bucket along the channel with the largest value
/// range (lowest channel index on ties) at the median value: pixels strictly
/// below the median go left, or pixels equal to it when nothing is below.
/// Buckets with zero range stay whole. Pixels map to their bucket's mean.
MedianCutResult median_cut_quantize(const ImageTensor& image, int bits);

}  // namespace dcq
