#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fusevid {

// Deterministic, splittable random stream.
//
// Streams derived with split() are independent of the parent's draw position:
// the child seed depends only on the parent seed and the label, never on how
// many values were consumed. uniform()/normal() are hand-rolled on top of the
// raw 64-bit generator so sequences are identical across standard libraries
// (std::*_distribution would not be).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Child stream keyed by (seed, label). Same inputs, same stream, always.
    Rng split(std::string_view label) const {
        return Rng(mix(seed_, fnv1a64(label)));
    }

    // Child stream keyed by (seed, numeric index).
    Rng split(std::uint64_t index) const {
        return Rng(mix(seed_, splitmix64(index ^ 0x9e3779b97f4a7c15ull)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        return splitmix64(a ^ splitmix64(b));
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fusevid
