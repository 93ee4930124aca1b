// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <optional>
#include <utility>

#include "dcq/error.hpp"
#include "dcq/quantizer.hpp"

namespace dcq {
namespace {

using Bucket = std::vector<std::uint32_t>;

std::optional<std::pair<Bucket, Bucket>> split_bucket(const Bucket& bucket, std::span<const float> pixels,
                                                      std::size_t channels) {
    std::size_t split_channel = 0;
    float best_range = 0.0f;
    for (std::size_t ch = 0; ch < channels; ++ch) {
        float lo = pixels[bucket.front() * channels + ch];
        float hi = lo;
        for (auto px : bucket) {
            lo = std::min(lo, pixels[px * channels + ch]);
            hi = std::max(hi, pixels[px * channels + ch]);
        }
        if (hi - lo > best_range) {
            best_range = hi - lo;
            split_channel = ch;
        }
    }
    if (best_range <= 0.0f) return std::nullopt;

    auto value = [&](std::uint32_t px) { return pixels[px * channels + split_channel]; };
    Bucket sorted = bucket;
    std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
        return value(a) != value(b) ? value(a) < value(b) : a < b;
    });
    const float median = value(sorted[sorted.size() / 2]);
    auto cut = std::partition_point(sorted.begin(), sorted.end(), [&](std::uint32_t px) { return value(px) < median; });
    if (cut == sorted.begin())
        cut = std::partition_point(sorted.begin(), sorted.end(), [&](std::uint32_t px) { return value(px) <= median; });

    Bucket left(sorted.begin(), cut);
    Bucket right(cut, sorted.end());
    // Keep buckets in pixel order so bucket contents do not depend on sort ties.
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
    return std::make_pair(std::move(left), std::move(right));
}

}  // namespace

MedianCutResult median_cut_quantize(const ImageTensor& image, int bits) {
    if (bits < 1 || bits > 8) throw InvalidArgument("median cut bit-width must be in [1, 8]");
    const std::size_t channels = image.channels();
    const std::size_t pixel_count = image.height() * image.width();
    const auto pixels = image.values();

    std::vector<Bucket> buckets(1);
    buckets[0].resize(pixel_count);
    std::iota(buckets[0].begin(), buckets[0].end(), 0u);
    for (int level = 0; level < bits; ++level) {
        std::vector<Bucket> next;
        for (auto& bucket : buckets) {
            if (auto halves = split_bucket(bucket, pixels, channels)) {
                next.push_back(std::move(halves->first));
                next.push_back(std::move(halves->second));
            } else {
                next.push_back(std::move(bucket));
            }
        }
        buckets = std::move(next);
    }

    MedianCutResult result;
    result.channels = channels;
    result.bits = bits;
    result.indices.assign(pixel_count, 0);
    for (std::size_t b = 0; b < buckets.size(); ++b) {
        std::vector<double> sum(channels, 0.0);
        for (auto px : buckets[b]) {
            for (std::size_t ch = 0; ch < channels; ++ch) sum[ch] += pixels[px * channels + ch];
            result.indices[px] = static_cast<std::uint8_t>(b);
        }
        for (std::size_t ch = 0; ch < channels; ++ch)
            result.palette.push_back(static_cast<float>(sum[ch] / static_cast<double>(buckets[b].size())));
    }
    return result;
}

ImageTensor MedianCutResult::reconstruct(const ImageShape& shape) const {
    if (shape.channels != channels || shape.height * shape.width != indices.size())
        throw ShapeError("median cut result does not match target shape");
    std::vector<float> values;
    values.reserve(shape.size());
    for (auto idx : indices)
        for (std::size_t ch = 0; ch < channels; ++ch) values.push_back(palette[idx * channels + ch]);
    return ImageTensor(shape, std::move(values));
}

}  // namespace dcq
