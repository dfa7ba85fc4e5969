#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mergesim {

/// Named, independently seeded random stream.
///
/// Each stream derives its engine seed from (master seed, stream name), so
/// enabling one consumer (e.g. measurement noise) never perturbs the draw
/// sequence of another (e.g. arrivals). Raw mt19937_64 output is mapped to
/// distributions in-house because the standard-library distribution objects
/// are not bit-stable across implementations.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view name)
        : engine_(derive_seed(master_seed, name)) {}

    std::uint64_t raw() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Symmetric uniform on [-bound, bound].
    double symmetric(double bound) { return uniform(-bound, bound); }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) {
        double z = 1.0 - uniform01();  // in (0, 1]
        return -std::log(z) / rate;
    }

    static std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name) {
        // FNV-1a over the name, folded with the master seed, then splitmix64.
        std::uint64_t h = 1469598103934665603ull;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        std::uint64_t z = master_seed ^ h;
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mergesim
