// SPDX-License-Identifier: Apache-2.0

#include "dcq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcq/error.hpp"

namespace dcq {

void check_bits(int bits) {
    if (bits < kMinBits || bits > kMaxBits)
        throw InvalidArgument("bit-width " + std::to_string(bits) + " outside [" + std::to_string(kMinBits) + ", " +
                              std::to_string(kMaxBits) + "]");
}

float round_half_away(float x) noexcept { return std::round(x); }

QuantParams calibrate(std::span<const float> values, int bits) {
    check_bits(bits);
    if (values.empty()) throw CalibrationError("cannot calibrate over an empty value set");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const float lo = *lo_it;
    const float hi = *hi_it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw CalibrationError("calibration values must be finite");

    QuantParams p;
    p.bits = bits;
    if (hi == lo) {
        p.scale = std::max(std::fabs(lo), kScaleEpsilon);
    } else {
        p.scale = (hi - lo) / static_cast<float>(p.qmax());
        p.scale = std::max({p.scale, std::fabs(lo) / kZeroPointLimit, kScaleEpsilon});
    }
    p.zero_point = static_cast<std::int32_t>(round_half_away(0.0f - lo / p.scale));
    return p;
}

std::uint8_t quantize_value(float v, const QuantParams& params) noexcept {
    const float qmax = static_cast<float>(params.qmax());
    const float t = v / params.scale + static_cast<float>(params.zero_point);
    const float s = round_half_away(std::clamp(t, -1.0f, qmax + 1.0f));
    return static_cast<std::uint8_t>(std::clamp(s, 0.0f, qmax));
}

float dequantize_value(std::uint8_t symbol, const QuantParams& params) noexcept {
    return static_cast<float>(static_cast<std::int32_t>(symbol) - params.zero_point) * params.scale;
}

bool in_quant_range(float v, const QuantParams& params) noexcept {
    const float t = v / params.scale + static_cast<float>(params.zero_point);
    const float s = round_half_away(std::clamp(t, -1.0f, static_cast<float>(params.qmax()) + 1.0f));
    return s >= 0.0f && s <= static_cast<float>(params.qmax());
}

SymbolBlock quantize(std::span<const float> values, const QuantParams& params) {
    SymbolBlock block;
    block.params = params;
    block.symbols.reserve(values.size());
    for (float v : values) block.symbols.push_back(quantize_value(v, params));
    return block;
}

std::vector<float> dequantize(const SymbolBlock& block) {
    std::vector<float> out;
    out.reserve(block.symbols.size());
    for (auto s : block.symbols) out.push_back(dequantize_value(s, block.params));
    return out;
}

std::vector<float> fake_quantize(std::span<const float> values, const QuantParams& params) {
    std::vector<float> out;
    out.reserve(values.size());
    for (float v : values) out.push_back(dequantize_value(quantize_value(v, params), params));
    return out;
}

SymbolBlock quantize_whole_image(const ImageTensor& image, int bits) {
    return quantize(image.values(), calibrate(image.values(), bits));
}

std::vector<SymbolBlock> quantize_patches(const ImageTensor& image, const PatchGeometry& geom, int bits) {
    check_bits(bits);
    std::vector<SymbolBlock> blocks;
    for (const auto& patch : split_patches(image, geom)) blocks.push_back(quantize(patch.values, calibrate(patch.values, bits)));
    return blocks;
}

}  // namespace dcq
