#include "xdup/core/kernels.hpp"

#include <atomic>
#include <bit>

#if defined(__x86_64__)
#include <cpuid.h>
#include <immintrin.h>
#endif

namespace xdup::kernels {

namespace scalar {

void xor_bytes(std::uint8_t* dst, const std::uint8_t* a, const std::uint8_t* b,
               std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] ^ b[i];
}

std::uint64_t popcount_xor(const std::uint8_t* a, const std::uint8_t* b,
                           std::size_t n) {
    std::uint64_t total = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        std::uint64_t wa = 0, wb = 0;
        for (int k = 0; k < 8; ++k) {
            wa |= static_cast<std::uint64_t>(a[i + k]) << (8 * k);
            wb |= static_cast<std::uint64_t>(b[i + k]) << (8 * k);
        }
        total += static_cast<std::uint64_t>(std::popcount(wa ^ wb));
    }
    for (; i < n; ++i)
        total += static_cast<std::uint64_t>(
            std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    return total;
}

void add_mod(std::uint32_t* dst, const std::uint32_t* a, const std::uint32_t* b,
             std::size_t n, std::uint32_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t s = a[i] + b[i];
        dst[i] = s >= p ? s - p : s;
    }
}

}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {

bool supported() {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    return (ebx & bit_AVX2) != 0;
}

__attribute__((target("avx2"))) void xor_bytes(std::uint8_t* dst,
                                               const std::uint8_t* a,
                                               const std::uint8_t* b,
                                               std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i),
                            _mm256_xor_si256(va, vb));
    }
    for (; i < n; ++i) dst[i] = a[i] ^ b[i];
}

// Nibble-LUT popcount over a^b, SAD-reduced to 64-bit lanes.
__attribute__((target("avx2"))) std::uint64_t popcount_xor(
    const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    const __m256i lookup =
        _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4, 0, 1,
                         1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low_mask = _mm256_set1_epi8(0x0F);
    __m256i acc = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        __m256i v = _mm256_xor_si256(va, vb);
        __m256i lo = _mm256_and_si256(v, low_mask);
        __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
        __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo),
                                      _mm256_shuffle_epi8(lookup, hi));
        acc = _mm256_add_epi64(acc, _mm256_sad_epu8(cnt, _mm256_setzero_si256()));
    }
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    std::uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    if (i < n) total += scalar::popcount_xor(a + i, b + i, n - i);
    return total;
}

__attribute__((target("avx2"))) void add_mod(std::uint32_t* dst,
                                             const std::uint32_t* a,
                                             const std::uint32_t* b,
                                             std::size_t n, std::uint32_t p) {
    const __m256i vp = _mm256_set1_epi32(static_cast<int>(p));
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        __m256i s = _mm256_add_epi32(va, vb);
        // s - p, then keep s where it went negative (s < p)
        __m256i r = _mm256_sub_epi32(s, vp);
        __m256i mask = _mm256_srai_epi32(r, 31);
        __m256i out = _mm256_blendv_epi8(r, s, mask);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), out);
    }
    for (; i < n; ++i) {
        std::uint32_t s = a[i] + b[i];
        dst[i] = s >= p ? s - p : s;
    }
}

}  // namespace avx2
#endif

namespace {

constexpr Dispatch kScalar{scalar::xor_bytes, scalar::popcount_xor,
                           scalar::add_mod, "scalar"};

#if defined(__x86_64__)
constexpr Dispatch kAvx2{avx2::xor_bytes, avx2::popcount_xor, avx2::add_mod,
                         "avx2"};
#endif

std::atomic<bool> g_force_scalar{false};

const Dispatch& resolve() {
#if defined(__x86_64__)
    static const bool have_avx2 = avx2::supported();
    if (have_avx2) return kAvx2;
#endif
    return kScalar;
}

}  // namespace

const Dispatch& active() {
    if (g_force_scalar.load(std::memory_order_relaxed)) return kScalar;
    static const Dispatch& chosen = resolve();
    return chosen;
}

void force_scalar(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

}  // namespace xdup::kernels
