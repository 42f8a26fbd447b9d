#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rcrbm {

// Derives an independent stream seed from a parent seed, a component name and
// an index. Every random decision in the library is seeded this way so that
// results are pure functions of the top-level seed.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view component, std::uint64_t index = 0);

// mt19937_64 with portable uniform/normal draws (the std distributions are
// implementation-defined, which would break byte-identical outputs across
// standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rcrbm
