// SPDX-License-Identifier: Apache-2.0
// Shared fixtures for the unit tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcq/random.hpp"
#include "dcq/tensor.hpp"

namespace testing {

inline dcq::ImageTensor random_image(const dcq::ImageShape& shape, std::uint64_t seed, float lo = 0.0f,
                                     float hi = 1.0f) {
    dcq::Rng rng(seed);
    std::vector<float> v(shape.size());
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return dcq::ImageTensor(shape, std::move(v));
}

inline dcq::DatasetBundle random_bundle(std::size_t count, const dcq::ImageShape& shape, std::uint64_t seed) {
    std::vector<dcq::ImageTensor> images;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < count; ++i) {
        images.push_back(random_image(shape, dcq::derive_seed(seed, i)));
        labels.push_back(static_cast<std::uint32_t>(i % 10));
    }
    return dcq::DatasetBundle(std::move(images), std::move(labels));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("dcq_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
