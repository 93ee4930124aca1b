// SPDX-License-Identifier: Apache-2.0

#include "dcq/corpus.hpp"

#include <cmath>
#include <vector>

#include "dcq/error.hpp"
#include "dcq/random.hpp"

namespace dcq {

DatasetBundle make_smooth_corpus(const CorpusSpec& spec) {
    if (spec.count == 0 || spec.shape.size() == 0 || spec.classes == 0)
        throw InvalidArgument("corpus needs at least one non-empty image and one class");
    const auto& s = spec.shape;
    std::vector<ImageTensor> images;
    std::vector<std::uint32_t> labels;
    images.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(spec.seed, i));
        std::vector<double> acc(s.size(), 0.0);
        for (std::size_t b = 0; b < spec.blobs; ++b) {
            const double cy = rng.uniform(0.0, static_cast<double>(s.height));
            const double cx = rng.uniform(0.0, static_cast<double>(s.width));
            const double sigma = rng.uniform(0.1, 0.35) * static_cast<double>(std::max(s.height, s.width));
            std::vector<double> amp(s.channels);
            for (auto& a : amp) a = rng.uniform(-1.0, 1.0);
            for (std::size_t y = 0; y < s.height; ++y)
                for (std::size_t x = 0; x < s.width; ++x) {
                    const double dy = static_cast<double>(y) + 0.5 - cy;
                    const double dx = static_cast<double>(x) + 0.5 - cx;
                    const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                    for (std::size_t c = 0; c < s.channels; ++c) acc[(y * s.width + x) * s.channels + c] += amp[c] * g;
                }
        }
        std::vector<float> values(s.size());
        for (std::size_t k = 0; k < values.size(); ++k)
            values[k] = static_cast<float>(acc[k] + spec.noise * rng.normal());
        images.emplace_back(s, std::move(values));
        labels.push_back(static_cast<std::uint32_t>(i % spec.classes));
    }
    return DatasetBundle(std::move(images), std::move(labels));
}

}  // namespace dcq
