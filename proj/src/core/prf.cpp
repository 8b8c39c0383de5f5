#include "xdup/core/prf.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace xdup {

namespace {

EVP_CIPHER_CTX* make_ecb_ctx(const PrfKey& key) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    if (EVP_EncryptInit_ex(ctx, EVP_aes_128_ecb(), nullptr, key.seed.data(),
                           nullptr) != 1) {
        EVP_CIPHER_CTX_free(ctx);
        throw std::runtime_error("AES init failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx, 0);
    return ctx;
}

}  // namespace

Prf::Prf(const PrfKey& key) : ctx_(make_ecb_ctx(key)) {}

Prf::~Prf() {
    if (ctx_) EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx_));
}

Prf::Prf(Prf&& o) noexcept : ctx_(o.ctx_) { o.ctx_ = nullptr; }

Prf& Prf::operator=(Prf&& o) noexcept {
    if (this != &o) {
        if (ctx_) EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx_));
        ctx_ = o.ctx_;
        o.ctx_ = nullptr;
    }
    return *this;
}

std::array<std::uint8_t, 16> Prf::eval_block(
    std::span<const std::uint8_t> input) const {
    auto* ctx = static_cast<EVP_CIPHER_CTX*>(ctx_);
    std::array<std::uint8_t, 16> state{};
    // CBC-MAC: chain AES over zero-padded 16-byte blocks. The length block up
    // front makes the padded encoding prefix-free, so the MAC stays a PRF
    // across input lengths.
    int out_len = 0;
    std::uint8_t len_block[16] = {0};
    for (int i = 0; i < 8; ++i)
        len_block[i] = (input.size() >> (8 * i)) & 0xFF;
    if (EVP_EncryptUpdate(ctx, state.data(), &out_len, len_block, 16) != 1 ||
        out_len != 16)
        throw std::runtime_error("AES encrypt failed");
    std::size_t off = 0;
    do {
        std::uint8_t block[16] = {0};
        std::size_t take = std::min<std::size_t>(16, input.size() - off);
        if (take > 0) std::memcpy(block, input.data() + off, take);
        for (int i = 0; i < 16; ++i) block[i] ^= state[i];
        int out_len = 0;
        if (EVP_EncryptUpdate(ctx, state.data(), &out_len, block, 16) != 1 ||
            out_len != 16)
            throw std::runtime_error("AES encrypt failed");
        off += take;
    } while (off < input.size());
    return state;
}

std::uint64_t Prf::eval_u64(std::span<const std::uint8_t> input) const {
    auto block = eval_block(input);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(block[i]) << (8 * i);
    return v;
}

std::uint32_t prf_eval(const PrfKey& key, std::span<const std::uint8_t> input,
                       std::uint32_t p) {
    if (p < 2) throw std::invalid_argument("prf_eval: modulus < 2");
    return Prf(key).eval_mod(input, p);
}

std::vector<std::uint8_t> prf_expand(const PrfKey& seed, std::size_t n_bytes) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    std::uint8_t iv[16] = {0};
    if (EVP_EncryptInit_ex(ctx, EVP_aes_128_ctr(), nullptr, seed.seed.data(),
                           iv) != 1) {
        EVP_CIPHER_CTX_free(ctx);
        throw std::runtime_error("AES-CTR init failed");
    }
    std::vector<std::uint8_t> zeros(n_bytes, 0), out(n_bytes);
    int out_len = 0;
    if (n_bytes > 0 &&
        EVP_EncryptUpdate(ctx, out.data(), &out_len, zeros.data(),
                          static_cast<int>(n_bytes)) != 1) {
        EVP_CIPHER_CTX_free(ctx);
        throw std::runtime_error("AES-CTR failed");
    }
    EVP_CIPHER_CTX_free(ctx);
    return out;
}

}  // namespace xdup
