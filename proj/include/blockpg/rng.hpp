#pragma once

#include <cstdint>
#include <limits>

namespace blockpg {

//! SplitMix64 finalizer, used to hash stream keys into generator state.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/*!
 * xoshiro256** generator whose state is derived from a key tuple.
 *
 * Every block update in a sweep owns one stream keyed by
 * (root seed, sweep index, block index), so the draws a block sees do not
 * depend on which thread runs it or in what order blocks are scheduled.
 */
class StreamRng
{
  public:
    using result_type = std::uint64_t;

    explicit StreamRng(std::uint64_t seed) noexcept : StreamRng(seed, 0, 0) {}

    StreamRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept
    {
        std::uint64_t z = seed;
        z = splitmix64_mix(z + 0x9e3779b97f4a7c15ULL);
        z = splitmix64_mix(z ^ (a + 0x632be59bd9b4e019ULL));
        z = splitmix64_mix(z ^ (b + 0x8cb92ba72f3d8dd7ULL));
        for (auto& s : state_)
        {
            z += 0x9e3779b97f4a7c15ULL;
            s = splitmix64_mix(z);
        }
    }

    //! Child stream; does not advance this generator.
    StreamRng split(std::uint64_t a, std::uint64_t b = 0) const noexcept
    {
        return StreamRng(state_[0] ^ state_[3], a, b);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    //! Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace blockpg
