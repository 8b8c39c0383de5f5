#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace xdup {

inline constexpr std::size_t kLambdaBits = 128;
inline constexpr std::size_t kLambdaBytes = kLambdaBits / 8;

struct PrfKey {
    std::array<std::uint8_t, kLambdaBytes> seed{};

    static PrfKey from_bytes(std::span<const std::uint8_t> b) {
        if (b.size() != kLambdaBytes)
            throw std::invalid_argument("PrfKey: need exactly 16 bytes");
        PrfKey k;
        std::copy(b.begin(), b.end(), k.seed.begin());
        return k;
    }
    bool operator==(const PrfKey&) const = default;
};

// Keyed PRF F_k: {0,1}* -> Z_p, AES-128 based (CBC-MAC over the input
// blocks). The mod-p reduction takes 64 pseudorandom bits modulo p, which
// for our moduli (p <= 2^16 + 1) keeps the bias below 2^-47.
//
// The key schedule is cached, so reuse one Prf per key in loops. Not
// thread-safe; one instance per thread.
class Prf {
  public:
    explicit Prf(const PrfKey& key);
    ~Prf();
    Prf(Prf&& o) noexcept;
    Prf& operator=(Prf&& o) noexcept;
    Prf(const Prf&) = delete;
    Prf& operator=(const Prf&) = delete;

    // raw 128-bit output
    std::array<std::uint8_t, 16> eval_block(std::span<const std::uint8_t> input) const;

    std::uint64_t eval_u64(std::span<const std::uint8_t> input) const;

    std::uint32_t eval_mod(std::span<const std::uint8_t> input,
                           std::uint32_t p) const {
        return static_cast<std::uint32_t>(eval_u64(input) % p);
    }

  private:
    void* ctx_ = nullptr;  // EVP_CIPHER_CTX
};

std::uint32_t prf_eval(const PrfKey& key, std::span<const std::uint8_t> input,
                       std::uint32_t p);

// AES-128-CTR keystream under `seed` with a zero IV; expands a lambda-bit
// OT seed into an arbitrarily long pseudorandom payload.
std::vector<std::uint8_t> prf_expand(const PrfKey& seed, std::size_t n_bytes);

}  // namespace xdup
