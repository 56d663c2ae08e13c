#ifndef BCD_RNG_HPP
#define BCD_RNG_HPP

#include <cstdint>

namespace bcd {

// Counter-based generator (Philox2x64-10). Each (seed, stream) pair is an
// independent stream indexed by a 64-bit draw counter, so replicate streams
// are reproducible regardless of execution order or thread count.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream) noexcept
        : seed_(seed), stream_(stream), counter_(0) {}

    uint64_t next_u64() noexcept { return philox(seed_, stream_, counter_++); }

    // Uniform draw strictly inside (0, 1).
    double next_double() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms per call.
    double next_normal() noexcept;

    uint64_t counter() const noexcept { return counter_; }

    static uint64_t philox(uint64_t key, uint64_t c0, uint64_t c1) noexcept {
        constexpr uint64_t kMul = 0xD2B74407B1CE6E93ULL;
        constexpr uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod =
                static_cast<unsigned __int128>(kMul) * c0;
            const uint64_t hi = static_cast<uint64_t>(prod >> 64);
            const uint64_t lo = static_cast<uint64_t>(prod);
            c0 = hi ^ key ^ c1;
            c1 = lo;
            key += kWeyl;
        }
        return c0;
    }

private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_;
};

}  // namespace bcd

#endif  // BCD_RNG_HPP
