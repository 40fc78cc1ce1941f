#pragma once

#include <cstdint>
#include <cmath>

#include "flexicubes/vec3.hpp"

namespace flexi {

// Deterministic RNG with platform-independent output. std::uniform_real_distribution
// is implementation-defined, so the double mappings live here. Streams derived
// from (seed, stream id) stay reproducible regardless of call interleaving.
class Rng {
public:
    explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ULL) { reseed(seed); }

    void reseed(uint64_t seed) {
        // splitmix64 expansion of the seed into xoshiro256** state
        uint64_t s = seed;
        for (int i = 0; i < 4; ++i) st_[i] = splitmix(s);
    }

    static Rng stream(uint64_t seed, uint64_t stream_id) {
        uint64_t s = seed;
        uint64_t mixed = splitmix(s) ^ (stream_id * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
        return Rng(mixed);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(st_[1] * 5, 7) * 9;
        const uint64_t t = st_[1] << 17;
        st_[2] ^= st_[0];
        st_[3] ^= st_[1];
        st_[1] ^= st_[2];
        st_[0] ^= st_[3];
        st_[2] ^= t;
        st_[3] = rotl(st_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    // uniform in [a,b)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    // uniform integer in [0,n)
    uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }
    int sign() { return (next_u64() & 1) ? 1 : -1; }

    // Box-Muller, deterministic (always burns two uniforms)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec3 uniform_in_box(const Vec3& lo, const Vec3& hi) {
        return {uniform(lo.x, hi.x), uniform(lo.y, hi.y), uniform(lo.z, hi.z)};
    }

    Vec3 unit_vector() {
        // uniform on the sphere via z + azimuth
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * M_PI);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    static uint64_t splitmix(uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t st_[4];
};

}  // namespace flexi
