#include "stabsde/rng.hpp"

#include <cmath>

namespace stabsde {

namespace {

std::uint64_t mix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index)
{
    return mix(mix(mix(seed) ^ fnv1a(tag)) + index);
}

Stream::Stream(std::uint64_t seed, std::string_view tag, std::uint64_t index)
    : eng_(derive_seed(seed, tag, index))
{
}

double Stream::uniform()
{
    // (k + 0.5) / 2^53 never hits 0 or 1
    std::uint64_t k = eng_() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double Stream::exponential() { return -std::log(uniform()); }

double Stream::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double th = 2.0 * 3.14159265358979323846 * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
}

} // namespace stabsde
