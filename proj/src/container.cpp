// SPDX-License-Identifier: Apache-2.0

#include "dcq/container.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "dcq/bytes.hpp"
#include "dcq/error.hpp"

namespace dcq {
namespace {

constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 40;

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large inputs in chunks.
    while (!bytes.empty()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size(), 1u << 30);
        crc = crc32(crc, bytes.data(), static_cast<uInt>(chunk));
        bytes = bytes.subspan(chunk);
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> pack_indices(std::span<const std::uint32_t> indices, int width) {
    std::vector<std::uint8_t> out((indices.size() * static_cast<std::size_t>(width) + 7) / 8, 0);
    std::size_t bit = 0;
    for (auto v : indices) {
        for (int i = width - 1; i >= 0; --i, ++bit)
            if ((v >> i) & 1u) out[bit >> 3] |= static_cast<std::uint8_t>(0x80u >> (bit & 7));
    }
    return out;
}

std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> bytes, std::size_t count, int width) {
    std::vector<std::uint32_t> out(count, 0);
    std::size_t bit = 0;
    for (auto& v : out) {
        for (int i = 0; i < width; ++i, ++bit) v = (v << 1) | ((bytes[bit >> 3] >> (7 - (bit & 7))) & 1u);
    }
    const std::size_t pad = bytes.size() * 8 - bit;
    if (pad > 0 && (bytes.back() & ((1u << pad) - 1u)) != 0) throw FormatError("container: nonzero index padding");
    return out;
}

struct Parsed {
    ContainerSummary summary;
    CompressedDataset data;
};

Parsed parse(std::span<const std::uint8_t> bytes, bool decode_body) {
    ByteReader r(bytes, "container");
    if (bytes.size() < 6) throw FormatError("container: truncated header");
    if (!r.expect_magic("DCQZ")) throw FormatError("container: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kContainerVersion) throw VersionError(version, kContainerVersion);
    if (bytes.size() < kContainerFixedHeaderBytes + kChecksumBytes) throw FormatError("container: truncated header");

    const auto body = bytes.first(bytes.size() - kChecksumBytes);
    ByteReader tail(bytes.last(kChecksumBytes), "container checksum");
    if (crc_of(body) != tail.u32()) throw FormatError("container: checksum mismatch (file corrupted or truncated)");

    Parsed out;
    auto& s = out.summary;
    auto& d = out.data;
    s.version = version;
    d.image_count = r.u32();
    d.shape.height = r.u32();
    d.shape.width = r.u32();
    d.shape.channels = r.u32();
    d.bits = r.u8();
    d.geom.patch_height = r.u16();
    d.geom.patch_width = r.u16();
    const std::size_t G = r.u32();

    if (d.image_count == 0 || d.shape.height == 0 || d.shape.width == 0 || d.shape.channels == 0)
        throw FormatError("container: zero dimension");
    if (d.bits < kMinBits || d.bits > kMaxBits) throw FormatError("container: bit-width out of range");
    const std::uint64_t per_image = std::uint64_t{d.shape.height} * d.shape.width * d.shape.channels;
    if (per_image > kMaxValues / d.image_count) throw FormatError("container: dimension overflow");
    std::size_t P = 0;
    try {
        P = d.geom.patch_count(d.shape);
    } catch (const GeometryError& e) {
        throw FormatError(std::string("container: ") + e.what());
    }
    const std::size_t patch_total = P * d.image_count;
    if (G == 0 || G > patch_total) throw FormatError("container: group count out of range");

    if (4 * std::uint64_t{d.image_count} + 6 * std::uint64_t{G} > body.size() - r.position())
        throw FormatError("container: truncated label or parameter block");
    d.labels.resize(d.image_count);
    for (auto& label : d.labels) label = r.u32();
    d.group_params.resize(G);
    for (auto& p : d.group_params) {
        p.scale = r.f32();
        p.zero_point = r.i16();
        p.bits = d.bits;
        if (!std::isfinite(p.scale) || !(p.scale > 0.0f)) throw FormatError("container: invalid group scale");
    }
    const int width = index_bit_width(G);
    const std::size_t index_bytes = (patch_total * static_cast<std::size_t>(width) + 7) / 8;
    const auto index_block = r.raw(index_bytes);
    if (r.position() > body.size()) throw FormatError("container: truncated index block");
    const std::size_t payload_bytes = body.size() - r.position();
    const auto payload_span = r.raw(payload_bytes);

    s.shape = d.shape;
    s.image_count = d.image_count;
    s.bits = d.bits;
    s.geom = d.geom;
    s.group_count = G;
    s.payload_bytes = payload_bytes;
    s.storage = storage_breakdown(patch_total, G, d.image_count, payload_bytes * 8);
    s.file_bytes = bytes.size();

    if (decode_body) {
        d.assignments = unpack_indices(index_block, patch_total, width);
        for (auto g : d.assignments)
            if (g >= G) throw FormatError("container: group index out of range");
        d.payload = parse_payload(payload_span);
        if (d.payload.alphabet_size != (1u << d.bits)) throw FormatError("container: payload alphabet mismatch");
        if (d.payload.symbol_count != per_image * d.image_count)
            throw FormatError("container: payload symbol count does not match image dimensions");
    }
    return out;
}

}  // namespace

int index_bit_width(std::size_t group_count) noexcept {
    return group_count <= 1 ? 0 : static_cast<int>(std::bit_width(group_count - 1));
}

StorageBreakdown storage_breakdown(std::size_t patch_total, std::size_t group_count, std::size_t image_count,
                                   std::uint64_t payload_bits) {
    StorageBreakdown s;
    s.size_indices = static_cast<std::uint64_t>(patch_total) * static_cast<std::uint64_t>(index_bit_width(group_count));
    s.size_params = static_cast<std::uint64_t>(group_count) * kGroupParamBits;
    s.size_payload = payload_bits;
    s.size_header = 8 * (kContainerFixedHeaderBytes + 4 * static_cast<std::uint64_t>(image_count) + kChecksumBytes);
    s.total = s.size_indices + s.size_params + s.size_payload + s.size_header;
    return s;
}

StorageBreakdown compute_storage(const CompressedDataset& data) {
    return storage_breakdown(data.assignments.size(), data.group_count(), data.image_count,
                             8 * serialize_payload(data.payload).size());
}

std::vector<std::uint8_t> write_container(const CompressedDataset& data) {
    const std::size_t G = data.group_count();
    const std::size_t P = data.geom.patch_count(data.shape);
    check_bits(data.bits);
    if (data.image_count == 0 || data.labels.size() != data.image_count)
        throw InvalidArgument("label count must equal the image count");
    if (data.assignments.size() != P * data.image_count) throw InvalidArgument("assignment count must be P * m");
    if (G == 0) throw InvalidArgument("container needs at least one group");
    if (data.geom.patch_height > 0xffff || data.geom.patch_width > 0xffff) throw InvalidArgument("patch too large");
    for (auto g : data.assignments)
        if (g >= G) throw InvalidArgument("assignment out of range");

    ByteWriter w;
    w.magic("DCQZ");
    w.u16(kContainerVersion);
    w.u32(static_cast<std::uint32_t>(data.image_count));
    w.u32(static_cast<std::uint32_t>(data.shape.height));
    w.u32(static_cast<std::uint32_t>(data.shape.width));
    w.u32(static_cast<std::uint32_t>(data.shape.channels));
    w.u8(static_cast<std::uint8_t>(data.bits));
    w.u16(static_cast<std::uint16_t>(data.geom.patch_height));
    w.u16(static_cast<std::uint16_t>(data.geom.patch_width));
    w.u32(static_cast<std::uint32_t>(G));
    for (auto label : data.labels) w.u32(label);
    for (const auto& p : data.group_params) {
        if (p.zero_point < std::numeric_limits<std::int16_t>::min() ||
            p.zero_point > std::numeric_limits<std::int16_t>::max())
            throw InvalidArgument("zero-point does not fit in int16");
        w.f32(p.scale);
        w.i16(static_cast<std::int16_t>(p.zero_point));
    }
    w.raw(pack_indices(data.assignments, index_bit_width(G)));
    w.raw(serialize_payload(data.payload));
    w.u32(crc_of(w.bytes()));
    return w.take();
}

CompressedDataset read_container(std::span<const std::uint8_t> bytes) { return parse(bytes, true).data; }

ContainerSummary inspect_container(std::span<const std::uint8_t> bytes) { return parse(bytes, false).summary; }

void save_container(const CompressedDataset& data, const std::string& path) {
    write_file_bytes(path, write_container(data));
}

CompressedDataset load_container(const std::string& path) { return read_container(read_file_bytes(path)); }

}  // namespace dcq
