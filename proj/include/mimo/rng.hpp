#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace mimo {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-streams from a seed.
constexpr std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream)
{
    return Rng(derive_seed(seed, stream));
}

// Draws from CN(0, 1): independent real and imaginary parts of variance 1/2.
class ComplexNormal {
public:
    std::complex<double> operator()(Rng& rng)
    {
        const double re = gauss_(rng);
        const double im = gauss_(rng);
        return {re, im};
    }

private:
    std::normal_distribution<double> gauss_{0.0, 0.70710678118654752440};
};

}  // namespace mimo
