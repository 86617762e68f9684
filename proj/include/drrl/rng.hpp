#pragma once

#include <cstdint>
#include <random>

namespace drrl {

/// Seeded 64-bit Mersenne twister with a platform-independent uniform draw.
///
/// std::uniform_real_distribution is implementation-defined, so draws are
/// produced directly from the top 53 bits of the engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace drrl
