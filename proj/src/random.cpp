#include "taskalloc/random.hpp"

#include <limits>

namespace taskalloc {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {
std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) noexcept {
    return splitmix64(splitmix64(master) ^ fnv1a(purpose));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index) noexcept {
    return splitmix64(derive_seed(master, purpose) ^ splitmix64(index + 1));
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

}  // namespace taskalloc
