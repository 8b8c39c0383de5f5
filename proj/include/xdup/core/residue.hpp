#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xdup/core/kernels.hpp"

namespace xdup {

// Value in Z_p. p = l + 1 throughout the protocols, never above 2^16 + 1.
class Residue {
  public:
    Residue() = default;
    Residue(std::uint32_t value, std::uint32_t modulus)
        : value_(value % modulus), p_(modulus) {
        if (modulus < 2) throw std::invalid_argument("Residue: modulus < 2");
    }

    std::uint32_t value() const { return value_; }
    std::uint32_t modulus() const { return p_; }

    Residue operator+(const Residue& o) const {
        check(o);
        std::uint32_t s = value_ + o.value_;
        return Residue::raw(s >= p_ ? s - p_ : s, p_);
    }
    Residue operator-(const Residue& o) const {
        check(o);
        return Residue::raw(value_ >= o.value_ ? value_ - o.value_
                                               : value_ + p_ - o.value_,
                            p_);
    }
    bool operator==(const Residue& o) const = default;

  private:
    static Residue raw(std::uint32_t v, std::uint32_t p) {
        Residue r;
        r.value_ = v;
        r.p_ = p;
        return r;
    }
    void check(const Residue& o) const {
        if (p_ != o.p_) throw std::invalid_argument("Residue: modulus mismatch");
    }
    std::uint32_t value_ = 0;
    std::uint32_t p_ = 2;
};

// Fixed-modulus vector in Z_p^n, stored flat for the SIMD kernels.
class ResidueVector {
  public:
    ResidueVector() = default;
    ResidueVector(std::uint32_t modulus, std::size_t n)
        : p_(modulus), v_(n, 0) {
        if (modulus < 2)
            throw std::invalid_argument("ResidueVector: modulus < 2");
    }

    std::uint32_t modulus() const { return p_; }
    std::size_t size() const { return v_.size(); }
    std::uint32_t operator[](std::size_t i) const { return v_[i]; }
    void set(std::size_t i, std::uint32_t val) { v_[i] = val % p_; }
    const std::uint32_t* data() const { return v_.data(); }
    std::uint32_t* data() { return v_.data(); }

    void add_in_place(const ResidueVector& o) {
        if (p_ != o.p_ || v_.size() != o.v_.size())
            throw std::invalid_argument("ResidueVector: shape mismatch");
        kernels::add_mod(v_.data(), v_.data(), o.v_.data(), v_.size(), p_);
    }

    bool operator==(const ResidueVector& o) const = default;

  private:
    std::uint32_t p_ = 2;
    std::vector<std::uint32_t> v_;
};

}  // namespace xdup
