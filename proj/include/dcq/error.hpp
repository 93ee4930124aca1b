// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dcq {

/// Base class for every error raised by the codec.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class GeometryError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Patches do not form an exact tiling of the target image.
class TilingError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class CalibrationError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class GroupCountError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class ShapeError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class EncodeError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Malformed, truncated or corrupted serialized data.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionError : public FormatError {
public:
    VersionError(std::uint16_t found, std::uint16_t expected)
        : FormatError("unsupported format version " + std::to_string(found) + " (expected " +
                      std::to_string(expected) + ")"),
          found_(found) {}

    std::uint16_t found() const noexcept { return found_; }

private:
    std::uint16_t found_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Even the smallest configuration does not fit the storage budget.
class InfeasibleBudget : public Error {
public:
    InfeasibleBudget(std::uint64_t required_bits, std::uint64_t budget_bits)
        : Error("budget infeasible: minimum footprint " + std::to_string(required_bits) +
                " bits exceeds budget " + std::to_string(budget_bits) + " bits (deficit " +
                std::to_string(required_bits - budget_bits) + " bits)"),
          required_bits_(required_bits),
          budget_bits_(budget_bits) {}

    std::uint64_t required_bits() const noexcept { return required_bits_; }
    std::uint64_t budget_bits() const noexcept { return budget_bits_; }
    std::uint64_t deficit_bits() const noexcept { return required_bits_ - budget_bits_; }

private:
    std::uint64_t required_bits_;
    std::uint64_t budget_bits_;
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(std::size_t image_index)
        : Error("refinement diverged (non-finite loss) on image " + std::to_string(image_index)),
          image_index_(image_index) {}

    std::size_t image_index() const noexcept { return image_index_; }

private:
    std::size_t image_index_;
};

}  // namespace dcq
