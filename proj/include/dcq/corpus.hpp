// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "dcq/tensor.hpp"

namespace dcq {

struct CorpusSpec {
    std::size_t count = 100;
    ImageShape shape{32, 32, 3};
    std::size_t blobs = 3;
    double noise = 0.02;
    std::uint64_t seed = 2024;
    std::uint32_t classes = 10;
};

/// Smooth synthetic images: a sum of random Gaussian blobs with per-channel
/// amplitudes plus a little white noise. Image i gets label i % classes.
/// Image i depends only on (seed, i), so prefixes of larger corpora agree.
DatasetBundle make_smooth_corpus(const CorpusSpec& spec = {});

}  // namespace dcq
