#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xdup/core/kernels.hpp"

namespace xdup {

class DimensionMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Element of {0,1}^l. Bit i (1-indexed) lives at byte (i-1)/8, LSB-first
// within the byte; bits beyond position l are kept zero so the packed bytes
// are directly usable as a wire encoding.
class BitString {
  public:
    BitString() = default;
    explicit BitString(std::uint32_t dimension)
        : dim_(dimension), bytes_((dimension + 7) / 8, 0) {}

    static BitString from_bytes(std::uint32_t dimension,
                                std::vector<std::uint8_t> bytes) {
        BitString s(dimension);
        if (bytes.size() != s.bytes_.size())
            throw std::invalid_argument("BitString::from_bytes: size mismatch");
        s.bytes_ = std::move(bytes);
        s.mask_tail();
        return s;
    }

    // "101" style, index 1 is the first character
    static BitString from_string(const std::string& bits) {
        BitString s(static_cast<std::uint32_t>(bits.size()));
        for (std::uint32_t i = 1; i <= bits.size(); ++i)
            if (bits[i - 1] == '1') s.set(i, true);
        return s;
    }

    std::uint32_t dimension() const { return dim_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    bool get(std::uint32_t i) const {
        return (bytes_[(i - 1) / 8] >> ((i - 1) % 8)) & 1;
    }
    void set(std::uint32_t i, bool v) {
        std::uint8_t m = static_cast<std::uint8_t>(1u << ((i - 1) % 8));
        if (v)
            bytes_[(i - 1) / 8] |= m;
        else
            bytes_[(i - 1) / 8] &= static_cast<std::uint8_t>(~m);
    }

    bool operator==(const BitString& o) const = default;

    void mask_tail() {
        if (dim_ % 8 != 0)
            bytes_.back() &= static_cast<std::uint8_t>((1u << (dim_ % 8)) - 1);
    }

  private:
    std::uint32_t dim_ = 0;
    std::vector<std::uint8_t> bytes_;
};

inline BitString bitstring_xor(const BitString& a, const BitString& b) {
    if (a.dimension() != b.dimension())
        throw DimensionMismatch("bitstring_xor: dimension mismatch");
    BitString out(a.dimension());
    std::vector<std::uint8_t> buf(a.bytes().size());
    kernels::xor_bytes(buf.data(), a.bytes().data(), b.bytes().data(),
                       buf.size());
    return BitString::from_bytes(a.dimension(), std::move(buf));
}

inline std::uint32_t hamming_weight(const BitString& a) {
    static const std::vector<std::uint8_t> zeros(8192, 0);
    const auto& b = a.bytes();
    if (b.size() <= zeros.size())
        return static_cast<std::uint32_t>(
            kernels::popcount_xor(b.data(), zeros.data(), b.size()));
    std::uint32_t w = 0;
    for (std::uint8_t byte : b)
        w += static_cast<std::uint32_t>(__builtin_popcount(byte));
    return w;
}

inline std::uint32_t hamming_distance(const BitString& a, const BitString& b) {
    if (a.dimension() != b.dimension())
        throw DimensionMismatch("hamming_distance: dimension mismatch");
    return static_cast<std::uint32_t>(kernels::popcount_xor(
        a.bytes().data(), b.bytes().data(), a.bytes().size()));
}

}  // namespace xdup
