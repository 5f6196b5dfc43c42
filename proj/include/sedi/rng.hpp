#pragma once

#include <cstdint>
#include <random>

namespace sedi {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Per-path random stream keyed by (seed, path index). Draws from a given
/// path are identical no matter which thread runs it, so Monte-Carlo results
/// do not depend on the thread count.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index)
        : engine_(splitmix64(seed ^ splitmix64(path_index + 0x51ed2701ull))) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sedi
