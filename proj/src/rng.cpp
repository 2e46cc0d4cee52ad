#include "navforge/rng.hpp"

#include <cmath>
#include <numbers>

namespace navforge {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_)
        w = splitmix64(x);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t Rng::uniform_int(uint64_t n) {
    const uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold)
            return r % n;
    }
}

double Rng::normal() {
    // u1 in (0, 1] keeps the log finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t derive_seed(uint64_t master, uint64_t tag) {
    uint64_t x = master ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL);
    uint64_t a = splitmix64(x);
    uint64_t b = splitmix64(x);
    return a ^ rotl(b, 32);
}

}  // namespace navforge
