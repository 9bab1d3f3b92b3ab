#pragma once

#include <cstdint>
#include <random>

namespace riskmix {

// Derive an independent seed from (seed, salt) via the splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// Seedable generator with platform-independent output. The engine is
// std::mt19937_64 (bit-exact by the standard); the uniform and normal
// transforms are implemented here because the std <random> distributions
// are not portable across library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0,1), 53-bit resolution
    double uniform01();
    // uniform on (0,1], safe as argument of log()
    double uniform_pos();
    // standard normal via Box-Muller; consumes exactly two uniforms per call
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace riskmix
