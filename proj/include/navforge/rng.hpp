#pragma once

#include <array>
#include <cstdint>

namespace navforge {

// xoshiro256** with splitmix64 seeding. Self-contained so that draws,
// stream splitting, and state serialization are bit-stable everywhere;
// checkpoint resume depends on restoring exact generator state.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n), rejection-sampled (n > 0).
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Box-Muller. No cached spare, so the generator
    // state is exactly the four words below.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::array<uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

private:
    std::array<uint64_t, 4> s_;
};

// Derive the seed of an independent substream from a master seed and a
// stream tag. Callers that need disjoint streams (map draw, resets,
// action noise, replay sampling) each derive their own.
uint64_t derive_seed(uint64_t master, uint64_t tag);

}  // namespace navforge
