// SPDX-License-Identifier: Apache-2.0

#include "dcq/entropy.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <queue>
#include <string>
#include <tuple>

#include "dcq/bytes.hpp"
#include "dcq/error.hpp"

namespace dcq {
namespace {

struct CanonicalCode {
    std::vector<std::uint32_t> codes;   // per symbol
    std::vector<int> lengths;           // per symbol
    std::vector<std::uint16_t> sorted;  // used symbols by (length, symbol)
    std::array<std::uint32_t, kMaxCodeLength + 1> first_code{};
    std::array<std::uint32_t, kMaxCodeLength + 1> count{};
    std::array<std::uint32_t, kMaxCodeLength + 1> offset{};
};

CanonicalCode build_canonical(std::vector<int> lengths) {
    CanonicalCode cc;
    cc.lengths = std::move(lengths);
    cc.codes.assign(cc.lengths.size(), 0);
    for (std::size_t s = 0; s < cc.lengths.size(); ++s)
        if (cc.lengths[s] > 0) cc.sorted.push_back(static_cast<std::uint16_t>(s));
    std::stable_sort(cc.sorted.begin(), cc.sorted.end(),
                     [&](std::uint16_t a, std::uint16_t b) { return cc.lengths[a] < cc.lengths[b]; });
    for (auto s : cc.sorted) ++cc.count[cc.lengths[s]];

    std::uint32_t code = 0;
    std::uint32_t index = 0;
    for (int len = 1; len <= kMaxCodeLength; ++len) {
        cc.first_code[len] = code;
        cc.offset[len] = index;
        code = (code + cc.count[len]) << 1;
        index += cc.count[len];
    }
    std::array<std::uint32_t, kMaxCodeLength + 1> next = cc.first_code;
    for (auto s : cc.sorted) cc.codes[s] = next[cc.lengths[s]]++;
    return cc;
}

class BitWriter {
public:
    void put(std::uint32_t code, int length) {
        for (int i = length - 1; i >= 0; --i) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> i) & 1u));
            if (++filled_ == 8) {
                bytes_.push_back(acc_);
                acc_ = 0;
                filled_ = 0;
            }
        }
    }
    std::vector<std::uint8_t> finish() {
        if (filled_ > 0) bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - filled_)));
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int filled_ = 0;
};

}  // namespace

std::vector<int> huffman_code_lengths(std::span<const std::uint64_t> frequencies, int max_length) {
    const std::size_t n = frequencies.size();
    std::vector<int> lengths(n, 0);
    std::vector<std::size_t> used;
    for (std::size_t s = 0; s < n; ++s)
        if (frequencies[s] > 0) used.push_back(s);
    if (used.size() <= 1) return lengths;

    // Nodes 0..n-1 are leaves; merged nodes get increasing ids after them.
    using Node = std::tuple<std::uint64_t, std::size_t>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
    std::vector<std::size_t> parent(n + used.size(), 0);
    for (auto s : used) heap.emplace(frequencies[s], s);
    std::size_t next_id = n;
    while (heap.size() > 1) {
        const auto [wa, a] = heap.top();
        heap.pop();
        const auto [wb, b] = heap.top();
        heap.pop();
        parent[a] = next_id;
        parent[b] = next_id;
        heap.emplace(wa + wb, next_id++);
    }
    const std::size_t root = next_id - 1;

    std::vector<std::size_t> depth_count(used.size() + 1, 0);
    for (auto s : used) {
        std::size_t depth = 0;
        for (std::size_t v = s; v != root; v = parent[v]) ++depth;
        ++depth_count[depth];
    }

    // Fold lengths above the limit back under it, keeping the Kraft sum at one.
    std::size_t max_depth = depth_count.size() - 1;
    while (max_depth > 0 && depth_count[max_depth] == 0) --max_depth;
    for (std::size_t i = max_depth; i > static_cast<std::size_t>(max_length); --i) {
        while (depth_count[i] > 0) {
            std::size_t j = i - 2;
            while (depth_count[j] == 0) --j;
            depth_count[i] -= 2;
            depth_count[i - 1] += 1;
            depth_count[j + 1] += 2;
            depth_count[j] -= 1;
        }
    }

    // Most frequent symbols take the shortest lengths; equal frequencies go by symbol.
    std::stable_sort(used.begin(), used.end(),
                     [&](std::size_t a, std::size_t b) { return frequencies[a] > frequencies[b]; });
    std::size_t k = 0;
    for (std::size_t len = 1; len < depth_count.size() && k < used.size(); ++len)
        for (std::size_t c = 0; c < depth_count[len]; ++c) lengths[used[k++]] = static_cast<int>(len);
    return lengths;
}

CodedPayload ec_encode(std::span<const std::uint8_t> symbols, std::size_t alphabet_size) {
    if (alphabet_size == 0 || alphabet_size > 256)
        throw EncodeError("alphabet size " + std::to_string(alphabet_size) + " outside [1, 256]");
    CodedPayload payload;
    payload.alphabet_size = static_cast<std::uint16_t>(alphabet_size);
    payload.symbol_count = symbols.size();
    payload.frequencies.assign(alphabet_size, 0);
    for (auto s : symbols) {
        if (s >= alphabet_size)
            throw EncodeError("symbol " + std::to_string(s) + " outside alphabet of size " + std::to_string(alphabet_size));
        ++payload.frequencies[s];
    }
    const auto code = build_canonical(huffman_code_lengths(payload.frequencies));
    BitWriter bits;
    for (auto s : symbols) bits.put(code.codes[s], code.lengths[s]);
    payload.bitstream = bits.finish();
    return payload;
}

namespace {

/// Validates the frequency table and returns the coded bit count it implies.
std::uint64_t checked_bit_count(const CodedPayload& payload, const std::vector<int>& lengths) {
    if (payload.alphabet_size == 0 || payload.alphabet_size > 256) throw FormatError("payload: bad alphabet size");
    if (payload.frequencies.size() != payload.alphabet_size) throw FormatError("payload: frequency table size mismatch");
    std::uint64_t total = 0;
    for (auto f : payload.frequencies) {
        if (f > payload.symbol_count - total) throw FormatError("payload: frequencies do not sum to symbol count");
        total += f;
    }
    if (total != payload.symbol_count) throw FormatError("payload: frequencies do not sum to symbol count");
    std::uint64_t bits = 0;
    for (std::size_t s = 0; s < payload.frequencies.size(); ++s)
        bits += payload.frequencies[s] * static_cast<std::uint64_t>(lengths[s]);
    return bits;
}

}  // namespace

std::vector<std::uint8_t> ec_decode(const CodedPayload& payload) {
    if (payload.frequencies.size() != payload.alphabet_size) throw FormatError("payload: frequency table size mismatch");
    const auto code = build_canonical(huffman_code_lengths(payload.frequencies));
    const std::uint64_t total_bits = checked_bit_count(payload, code.lengths);
    if (payload.bitstream.size() != (total_bits + 7) / 8)
        throw FormatError("payload: bitstream holds " + std::to_string(payload.bitstream.size()) + " bytes, expected " +
                          std::to_string((total_bits + 7) / 8));

    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(payload.symbol_count, 1u << 24)));
    if (code.sorted.empty()) {
        if (payload.symbol_count == 0) return out;
        const auto only = std::find_if(payload.frequencies.begin(), payload.frequencies.end(),
                                       [](std::uint64_t f) { return f > 0; });
        out.assign(payload.symbol_count, static_cast<std::uint8_t>(only - payload.frequencies.begin()));
        return out;
    }

    std::uint64_t bitpos = 0;
    auto next_bit = [&]() -> std::uint32_t {
        if (bitpos >= total_bits) throw FormatError("payload: bitstream ends early");
        const std::uint32_t bit = (payload.bitstream[bitpos >> 3] >> (7 - (bitpos & 7))) & 1u;
        ++bitpos;
        return bit;
    };
    std::vector<std::uint64_t> seen(payload.alphabet_size, 0);
    for (std::uint64_t i = 0; i < payload.symbol_count; ++i) {
        std::uint32_t c = 0;
        int len = 0;
        for (;;) {
            c = (c << 1) | next_bit();
            ++len;
            if (len > kMaxCodeLength) throw FormatError("payload: invalid code in bitstream");
            if (c - code.first_code[len] < code.count[len]) {
                const auto sym = code.sorted[code.offset[len] + (c - code.first_code[len])];
                out.push_back(static_cast<std::uint8_t>(sym));
                ++seen[sym];
                break;
            }
        }
    }
    if (bitpos != total_bits || seen != payload.frequencies) throw FormatError("payload: decoded stream does not match its frequency table");
    const unsigned pad = static_cast<unsigned>(payload.bitstream.size() * 8 - total_bits);
    if (pad > 0 && (payload.bitstream.back() & ((1u << pad) - 1u)) != 0) throw FormatError("payload: nonzero padding bits");
    return out;
}

std::vector<std::uint8_t> serialize_payload(const CodedPayload& payload) {
    ByteWriter w;
    w.u16(payload.alphabet_size);
    w.u64(payload.symbol_count);
    for (auto f : payload.frequencies) w.varint(f);
    w.raw(payload.bitstream);
    return w.take();
}

CodedPayload parse_payload(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "payload");
    CodedPayload p;
    p.alphabet_size = r.u16();
    if (p.alphabet_size == 0 || p.alphabet_size > 256) throw FormatError("payload: bad alphabet size");
    p.symbol_count = r.u64();
    p.frequencies.resize(p.alphabet_size);
    for (auto& f : p.frequencies) f = r.varint();
    const std::uint64_t bits = checked_bit_count(p, huffman_code_lengths(p.frequencies));
    if (r.remaining() != (bits + 7) / 8)
        throw FormatError("payload: bitstream holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string((bits + 7) / 8));
    auto rest = r.raw(r.remaining());
    p.bitstream.assign(rest.begin(), rest.end());
    return p;
}

std::size_t payload_header_bytes(const CodedPayload& payload) {
    ByteWriter w;
    for (auto f : payload.frequencies) w.varint(f);
    return 2 + 8 + w.size();
}

std::uint64_t raw_packed_bits(std::uint64_t count, int bits) {
    return (count * static_cast<std::uint64_t>(bits) + 7) / 8 * 8;
}

}  // namespace dcq
