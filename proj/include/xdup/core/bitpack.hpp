#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace xdup {

// LSB-first bit packing; fields are concatenated with no padding.
class BitWriter {
  public:
    void put(std::uint64_t value, std::uint32_t width) {
        for (std::uint32_t i = 0; i < width; ++i) {
            if (bit_pos_ % 8 == 0) buf_.push_back(0);
            if ((value >> i) & 1)
                buf_.back() |= static_cast<std::uint8_t>(1u << (bit_pos_ % 8));
            ++bit_pos_;
        }
    }
    void put_bytes(std::span<const std::uint8_t> bytes, std::uint32_t n_bits) {
        for (std::uint32_t i = 0; i < n_bits; ++i)
            put((bytes[i / 8] >> (i % 8)) & 1, 1);
    }
    std::size_t bit_size() const { return bit_pos_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

  private:
    std::vector<std::uint8_t> buf_;
    std::size_t bit_pos_ = 0;
};

class BitReader {
  public:
    explicit BitReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::uint64_t get(std::uint32_t width) {
        std::uint64_t v = 0;
        for (std::uint32_t i = 0; i < width; ++i) {
            if (bit_pos_ / 8 >= buf_.size())
                throw std::out_of_range("BitReader: out of data");
            if ((buf_[bit_pos_ / 8] >> (bit_pos_ % 8)) & 1)
                v |= 1ull << i;
            ++bit_pos_;
        }
        return v;
    }
    std::vector<std::uint8_t> get_bytes(std::uint32_t n_bits) {
        std::vector<std::uint8_t> out((n_bits + 7) / 8, 0);
        for (std::uint32_t i = 0; i < n_bits; ++i)
            if (get(1)) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        return out;
    }

  private:
    std::span<const std::uint8_t> buf_;
    std::size_t bit_pos_ = 0;
};

}  // namespace xdup
