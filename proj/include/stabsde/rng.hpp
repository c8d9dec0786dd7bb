#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stabsde {

// Seeds are derived from (experiment seed, module tag, stream index) so that
// every worker owns a distinct stream and results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

class Stream {
public:
    Stream(std::uint64_t seed, std::string_view tag, std::uint64_t index);

    // uniform on the open interval (0, 1), 53 random bits
    double uniform();
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double exponential();
    double normal();

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace stabsde
