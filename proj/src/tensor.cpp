// SPDX-License-Identifier: Apache-2.0

#include "dcq/tensor.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "dcq/bytes.hpp"
#include "dcq/error.hpp"

namespace dcq {

ImageTensor::ImageTensor(ImageShape shape) : shape_(shape), values_(shape.size(), 0.0f) {}

ImageTensor::ImageTensor(ImageShape shape, std::vector<float> values) : shape_(shape), values_(std::move(values)) {
    if (shape_.height == 0 || shape_.width == 0 || shape_.channels == 0)
        throw ShapeError("image dimensions must be positive");
    if (values_.size() != shape_.size())
        throw ShapeError("image value count " + std::to_string(values_.size()) + " does not match H*W*C = " +
                         std::to_string(shape_.size()));
    for (float v : values_)
        if (!std::isfinite(v)) throw ShapeError("image contains a non-finite value");
}

void PatchGeometry::validate(const ImageShape& shape) const {
    if (patch_height == 0 || patch_width == 0) throw GeometryError("patch dimensions must be positive");
    if (patch_height > shape.height || patch_width > shape.width)
        throw GeometryError("patch " + std::to_string(patch_height) + "x" + std::to_string(patch_width) +
                            " is larger than image " + std::to_string(shape.height) + "x" +
                            std::to_string(shape.width));
}

std::size_t PatchGeometry::rows_of_patches(const ImageShape& shape) const {
    return (shape.height + patch_height - 1) / patch_height;
}

std::size_t PatchGeometry::cols_of_patches(const ImageShape& shape) const {
    return (shape.width + patch_width - 1) / patch_width;
}

std::size_t PatchGeometry::patch_count(const ImageShape& shape) const {
    validate(shape);
    return rows_of_patches(shape) * cols_of_patches(shape);
}

std::vector<PatchExtent> patch_layout(const ImageShape& shape, const PatchGeometry& geom) {
    geom.validate(shape);
    std::vector<PatchExtent> out;
    out.reserve(geom.patch_count(shape));
    for (std::size_t r = 0; r < shape.height; r += geom.patch_height) {
        for (std::size_t c = 0; c < shape.width; c += geom.patch_width) {
            out.push_back({r, c, std::min(geom.patch_height, shape.height - r),
                           std::min(geom.patch_width, shape.width - c)});
        }
    }
    return out;
}

std::vector<Patch> split_patches(const ImageTensor& image, const PatchGeometry& geom, std::size_t image_index) {
    const auto& shape = image.shape();
    const auto layout = patch_layout(shape, geom);
    const std::size_t C = shape.channels;
    std::vector<Patch> patches;
    patches.reserve(layout.size());
    const auto src = image.values();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        Patch p{e.origin_row, e.origin_col, e.rows, e.cols, C, image_index, i, {}};
        p.values.reserve(p.size());
        for (std::size_t r = 0; r < e.rows; ++r) {
            const std::size_t start = ((e.origin_row + r) * shape.width + e.origin_col) * C;
            p.values.insert(p.values.end(), src.begin() + static_cast<std::ptrdiff_t>(start),
                            src.begin() + static_cast<std::ptrdiff_t>(start + e.cols * C));
        }
        patches.push_back(std::move(p));
    }
    return patches;
}

ImageTensor merge_patches(std::span<const Patch> patches, const ImageShape& shape) {
    if (shape.size() == 0) throw TilingError("target image has zero size");
    std::vector<float> values(shape.size(), 0.0f);
    std::vector<bool> covered(shape.height * shape.width, false);
    std::size_t covered_count = 0;
    for (const auto& p : patches) {
        if (p.channels != shape.channels) throw TilingError("patch channel count does not match image");
        if (p.values.size() != p.size()) throw TilingError("patch value count does not match its extent");
        if (p.rows == 0 || p.cols == 0 || p.origin_row + p.rows > shape.height ||
            p.origin_col + p.cols > shape.width)
            throw TilingError("patch exceeds image bounds");
        for (std::size_t r = 0; r < p.rows; ++r) {
            for (std::size_t c = 0; c < p.cols; ++c) {
                const std::size_t pixel = (p.origin_row + r) * shape.width + p.origin_col + c;
                if (covered[pixel]) throw TilingError("patches overlap at pixel " + std::to_string(pixel));
                covered[pixel] = true;
                ++covered_count;
                for (std::size_t ch = 0; ch < shape.channels; ++ch)
                    values[pixel * shape.channels + ch] = p.values[(r * p.cols + c) * p.channels + ch];
            }
        }
    }
    if (covered_count != covered.size())
        throw TilingError("patches leave " + std::to_string(covered.size() - covered_count) + " pixels uncovered");
    return ImageTensor(shape, std::move(values));
}

DatasetBundle::DatasetBundle(std::vector<ImageTensor> images, std::vector<std::uint32_t> labels)
    : images_(std::move(images)), labels_(std::move(labels)) {
    if (images_.empty()) throw ShapeError("dataset bundle must contain at least one image");
    if (labels_.size() != images_.size()) throw ShapeError("label count does not match image count");
    for (const auto& img : images_)
        if (img.shape() != images_.front().shape()) throw ShapeError("bundle images differ in shape");
}

DatasetBundle DatasetBundle::prefix(std::size_t n) const {
    if (n == 0 || n > images_.size()) throw ShapeError("prefix length out of range");
    return DatasetBundle({images_.begin(), images_.begin() + static_cast<std::ptrdiff_t>(n)},
                         {labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n)});
}

std::vector<Patch> split_bundle(const DatasetBundle& bundle, const PatchGeometry& geom) {
    std::vector<Patch> all;
    for (std::size_t i = 0; i < bundle.size(); ++i) {
        auto patches = split_patches(bundle.images()[i], geom, i);
        all.insert(all.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    return all;
}

std::vector<std::uint8_t> encode_tensor_file(const DatasetBundle& bundle) {
    if (bundle.empty()) throw ShapeError("cannot serialize an empty bundle");
    const auto& s = bundle.shape();
    ByteWriter w;
    w.magic("DCQT");
    w.u16(kTensorFileVersion);
    w.u32(static_cast<std::uint32_t>(bundle.size()));
    w.u32(static_cast<std::uint32_t>(s.height));
    w.u32(static_cast<std::uint32_t>(s.width));
    w.u32(static_cast<std::uint32_t>(s.channels));
    for (auto label : bundle.labels()) w.u32(label);
    for (const auto& img : bundle.images())
        for (float v : img.values()) w.f32(v);
    return w.take();
}

DatasetBundle decode_tensor_file(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "tensor file");
    if (!r.expect_magic("DCQT")) throw FormatError("tensor file: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kTensorFileVersion) throw VersionError(version, kTensorFileVersion);
    const std::uint64_t count = r.u32();
    const std::uint64_t H = r.u32();
    const std::uint64_t W = r.u32();
    const std::uint64_t C = r.u32();
    if (count == 0 || H == 0 || W == 0 || C == 0) throw FormatError("tensor file: zero dimension");
    // Each factor is below 2^32; reject products that cannot fit in memory.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
    if (H * W > limit / C || H * W * C > limit / count) throw FormatError("tensor file: dimension overflow");
    const std::uint64_t per_image = H * W * C;
    const std::uint64_t needed = count * 4 + count * per_image * 4;
    if (needed > r.remaining()) throw FormatError("tensor file: truncated payload");
    if (needed < r.remaining()) throw FormatError("tensor file: trailing bytes after payload");

    std::vector<std::uint32_t> labels(count);
    for (auto& label : labels) label = r.u32();
    const ImageShape shape{H, W, C};
    std::vector<ImageTensor> images;
    images.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<float> values(per_image);
        for (auto& v : values) v = r.f32();
        try {
            images.emplace_back(shape, std::move(values));
        } catch (const ShapeError& e) {
            throw FormatError(std::string("tensor file: ") + e.what());
        }
    }
    return DatasetBundle(std::move(images), std::move(labels));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

DatasetBundle load_tensor_file(const std::string& path) { return decode_tensor_file(read_file_bytes(path)); }

void save_tensor_file(const DatasetBundle& bundle, const std::string& path) {
    write_file_bytes(path, encode_tensor_file(bundle));
}

}  // namespace dcq
