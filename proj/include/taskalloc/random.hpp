#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace taskalloc {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sub-seed for a named purpose. Adding a new purpose never perturbs the
/// streams of existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index) noexcept;

/// Seeded generator with platform-independent sampling helpers (the standard
/// distributions are implementation-defined, so they are avoided here).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace taskalloc
