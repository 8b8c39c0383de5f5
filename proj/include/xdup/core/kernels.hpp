#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops shared by the whole library. Every kernel has a
// scalar reference implementation and may have a SIMD variant; the active
// variant is picked once at startup from CPUID. The scalar versions stay
// compiled in as the equivalence baseline for tests.

namespace xdup::kernels {

struct Dispatch {
    void (*xor_bytes)(std::uint8_t* dst, const std::uint8_t* a,
                      const std::uint8_t* b, std::size_t n);
    std::uint64_t (*popcount_xor)(const std::uint8_t* a, const std::uint8_t* b,
                                  std::size_t n);
    // dst[i] = (a[i] + b[i]) mod p, inputs already reduced
    void (*add_mod)(std::uint32_t* dst, const std::uint32_t* a,
                    const std::uint32_t* b, std::size_t n, std::uint32_t p);
    const char* name;
};

namespace scalar {
void xor_bytes(std::uint8_t* dst, const std::uint8_t* a, const std::uint8_t* b,
               std::size_t n);
std::uint64_t popcount_xor(const std::uint8_t* a, const std::uint8_t* b,
                           std::size_t n);
void add_mod(std::uint32_t* dst, const std::uint32_t* a, const std::uint32_t* b,
             std::size_t n, std::uint32_t p);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
void xor_bytes(std::uint8_t* dst, const std::uint8_t* a, const std::uint8_t* b,
               std::size_t n);
std::uint64_t popcount_xor(const std::uint8_t* a, const std::uint8_t* b,
                           std::size_t n);
void add_mod(std::uint32_t* dst, const std::uint32_t* a, const std::uint32_t* b,
             std::size_t n, std::uint32_t p);
bool supported();
}  // namespace avx2
#endif

// Active table, resolved on first use.
const Dispatch& active();

// Test hook: force the scalar table regardless of CPU support.
void force_scalar(bool on);

inline void xor_bytes(std::uint8_t* dst, const std::uint8_t* a,
                      const std::uint8_t* b, std::size_t n) {
    active().xor_bytes(dst, a, b, n);
}
inline std::uint64_t popcount_xor(const std::uint8_t* a, const std::uint8_t* b,
                                  std::size_t n) {
    return active().popcount_xor(a, b, n);
}
inline void add_mod(std::uint32_t* dst, const std::uint32_t* a,
                    const std::uint32_t* b, std::size_t n, std::uint32_t p) {
    active().add_mod(dst, a, b, n, p);
}

}  // namespace xdup::kernels
