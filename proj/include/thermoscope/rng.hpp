#ifndef THERMOSCOPE_RNG_HPP
#define THERMOSCOPE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace thermoscope {

// Splittable counter-style generator built on the splitmix64 mixing function.
// Streams are derived by hashing (seed, stream index) pairs, so the draws of
// one substream are independent of how many values other substreams consumed.
// Recorded in dataset metadata as "splitmix64".
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1); never returns 0 so logs are safe.
    double next_open() {
        double u;
        do {
            u = next_double();
        } while (u == 0.0);
        return u;
    }

    // Standard normal via the Marsaglia polar method (no libm trig, exactly
    // reproducible for a fixed uniform stream).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Child stream: mixes the index through an independent round so that
    // child(seed, i) and child(seed, j) are decorrelated for i != j.
    static std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
        return mixer.next_u64();
    }

    static SplitMix64 child(std::uint64_t seed, std::uint64_t index) {
        return SplitMix64(child_seed(seed, index));
    }

    SplitMix64 split(std::uint64_t index) const { return child(state_, index); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline constexpr const char* kRngAlgorithm = "splitmix64";

}  // namespace thermoscope

#endif
