#pragma once

#include <cstdint>
#include <random>

namespace bivcal {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Seeded random stream. Substreams derived with split() depend only on the
/// parent seed and the key, so work can be distributed over threads without
/// changing results.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    RandomStream split(std::uint64_t key) const {
        return RandomStream(detail::splitmix64(seed_ ^ detail::splitmix64(key + 0x632be59bd9b4e019ULL)));
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_(engine_); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace bivcal
