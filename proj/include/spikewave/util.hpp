// util.hpp -- deterministic RNG, hashing, small shared helpers.
#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace spikewave {

inline constexpr const char* kToolVersion = "0.1.0";

// SplitMix64 generator. We avoid <random> distributions on purpose: their
// output is implementation-defined, and reproducibility across toolchains is
// part of the contract for exported files.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Derive an independent stream for a named sub-task.
    Rng fork(std::uint64_t salt) const {
        return Rng(state_ ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
    }

  private:
    std::uint64_t state_;
};

// FNV-1a, used for the config hash carried in output file headers.
inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

} // namespace spikewave
