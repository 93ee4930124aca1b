// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dcq {

/// Height, width and channel count of one image.
struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t size() const noexcept { return height * width * channels; }
    bool operator==(const ImageShape&) const = default;
};

/// H x W x C image of binary32 values, row-major with channel fastest.
class ImageTensor {
public:
    ImageTensor() = default;
    /// Zero-filled image.
    explicit ImageTensor(ImageShape shape);
    /// Takes ownership of values; throws ShapeError on a length mismatch or a
    /// non-finite value.
    ImageTensor(ImageShape shape, std::vector<float> values);

    const ImageShape& shape() const noexcept { return shape_; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }

    float at(std::size_t row, std::size_t col, std::size_t ch) const {
        return values_[(row * shape_.width + col) * shape_.channels + ch];
    }
    float& at(std::size_t row, std::size_t col, std::size_t ch) {
        return values_[(row * shape_.width + col) * shape_.channels + ch];
    }

    bool operator==(const ImageTensor&) const = default;

private:
    ImageShape shape_;
    std::vector<float> values_;
};

enum class EdgePolicy {
    // Trailing patches shrink to the remainder of the image.
    Ragged,
};

struct PatchGeometry {
    std::size_t patch_height = 5;
    std::size_t patch_width = 5;
    EdgePolicy edge_policy = EdgePolicy::Ragged;

    /// Throws GeometryError unless 1 <= h <= H and 1 <= w <= W.
    void validate(const ImageShape& shape) const;
    std::size_t rows_of_patches(const ImageShape& shape) const;
    std::size_t cols_of_patches(const ImageShape& shape) const;
    /// P = ceil(H/h) * ceil(W/w).
    std::size_t patch_count(const ImageShape& shape) const;

    bool operator==(const PatchGeometry&) const = default;
};

/// A rectangular region of an image spanning all channels. Values are
/// row-major within the patch, channel fastest.
struct Patch {
    std::size_t origin_row = 0;
    std::size_t origin_col = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t channels = 0;
    std::size_t image_index = 0;
    std::size_t patch_index = 0;
    std::vector<float> values;

    std::size_t size() const noexcept { return rows * cols * channels; }
};

/// Origin and extent of every patch of an image, in canonical order, without values.
struct PatchExtent {
    std::size_t origin_row;
    std::size_t origin_col;
    std::size_t rows;
    std::size_t cols;
};
std::vector<PatchExtent> patch_layout(const ImageShape& shape, const PatchGeometry& geom);

/// Tiles the image row-major by origin. patch_index restarts at 0 for every image.
std::vector<Patch> split_patches(const ImageTensor& image, const PatchGeometry& geom, std::size_t image_index = 0);

/// Reassembles an image; throws TilingError on overlap, gaps or out-of-bounds patches.
ImageTensor merge_patches(std::span<const Patch> patches, const ImageShape& shape);

/// Images with their hard labels; every image has the same shape.
class DatasetBundle {
public:
    DatasetBundle() = default;
    /// Throws ShapeError if empty, if shapes differ or if label count mismatches.
    DatasetBundle(std::vector<ImageTensor> images, std::vector<std::uint32_t> labels);

    const std::vector<ImageTensor>& images() const noexcept { return images_; }
    const std::vector<std::uint32_t>& labels() const noexcept { return labels_; }
    const ImageShape& shape() const { return images_.front().shape(); }
    std::size_t size() const noexcept { return images_.size(); }
    bool empty() const noexcept { return images_.empty(); }

    /// First n images and labels.
    DatasetBundle prefix(std::size_t n) const;

    bool operator==(const DatasetBundle&) const = default;

private:
    std::vector<ImageTensor> images_;
    std::vector<std::uint32_t> labels_;
};

/// Every patch of every image in global order: image-major, then row-major by origin.
std::vector<Patch> split_bundle(const DatasetBundle& bundle, const PatchGeometry& geom);

inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor_file(const DatasetBundle& bundle);
DatasetBundle decode_tensor_file(std::span<const std::uint8_t> bytes);

DatasetBundle load_tensor_file(const std::string& path);
void save_tensor_file(const DatasetBundle& bundle, const std::string& path);

}  // namespace dcq
