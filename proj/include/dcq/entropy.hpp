// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dcq {

inline constexpr int kMaxCodeLength = 16;

/// Canonical Huffman coded symbol stream.
///
/// Wire layout (little-endian): alphabet_size u16 | symbol_count u64 |
/// alphabet_size LEB128 frequencies | bitstream. The bitstream is MSB-first,
/// zero-padded to a byte, and its length follows from the frequencies.
struct CodedPayload {
    std::uint16_t alphabet_size = 0;
    std::uint64_t symbol_count = 0;
    std::vector<std::uint64_t> frequencies;
    std::vector<std::uint8_t> bitstream;

    bool operator==(const CodedPayload&) const = default;
};

/// Code lengths (0 for unused symbols) for an optimal prefix code limited to
/// max_length bits. Ties merge the lower symbol first; a single used symbol
/// gets length 0.
std::vector<int> huffman_code_lengths(std::span<const std::uint64_t> frequencies, int max_length = kMaxCodeLength);

/// Throws EncodeError if any symbol >= alphabet_size or the alphabet is not in [1, 256].
CodedPayload ec_encode(std::span<const std::uint8_t> symbols, std::size_t alphabet_size);
/// Throws FormatError on count/frequency mismatch or a malformed bitstream.
std::vector<std::uint8_t> ec_decode(const CodedPayload& payload);

std::vector<std::uint8_t> serialize_payload(const CodedPayload& payload);
/// Parses exactly `bytes`; trailing or missing bytes are a FormatError.
CodedPayload parse_payload(std::span<const std::uint8_t> bytes);

/// Bytes of the header fields (alphabet, count, frequency table).
std::size_t payload_header_bytes(const CodedPayload& payload);

/// ceil(count * bits / 8) bytes, as bits: the plain fixed-width packing size.
std::uint64_t raw_packed_bits(std::uint64_t count, int bits);

}  // namespace dcq
