#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hjbqvi {

// splitmix64; used to derive independent per-path seeds from a root seed.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Gaussian sampler with a fully pinned-down generation path (mt19937_64 +
// Box-Muller). std::normal_distribution is not used because its algorithm
// is implementation-defined, which would break the bitwise-reproducibility
// contract across standard libraries.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : gen_(seed) {}

    double uniform01() {
        // in (0,1]; never zero so log() below is safe
        return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace hjbqvi
