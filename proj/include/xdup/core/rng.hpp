#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "xdup/core/bitstring.hpp"
#include "xdup/core/residue.hpp"

namespace xdup {

// All protocol sampling flows through one of these so transcripts replay
// under a fixed seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = std::random_device{}()) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, bound) without modulo bias
    std::uint64_t uniform(std::uint64_t bound) {
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = gen_();
            if (r >= threshold) return r % bound;
        }
    }

    bool bit() { return gen_() & 1; }

    std::vector<std::uint8_t> bytes(std::size_t n) {
        std::vector<std::uint8_t> out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<std::uint8_t>(gen_() & 0xFF);
        return out;
    }

    // child generator for parallel/sharded use
    Rng fork() { return Rng(gen_()); }

  private:
    std::mt19937_64 gen_;
};

inline BitString sample_bitstring(Rng& rng, std::uint32_t l) {
    BitString s = BitString::from_bytes(l, rng.bytes((l + 7) / 8));
    return s;
}

inline Residue sample_residue(Rng& rng, std::uint32_t p) {
    return Residue(static_cast<std::uint32_t>(rng.uniform(p)), p);
}

inline ResidueVector sample_residue_vector(Rng& rng, std::uint32_t p,
                                           std::size_t n) {
    ResidueVector v(p, n);
    for (std::size_t i = 0; i < n; ++i)
        v.set(i, static_cast<std::uint32_t>(rng.uniform(p)));
    return v;
}

}  // namespace xdup
