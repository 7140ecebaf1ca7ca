#ifndef PROJFPE_RNG_HPP
#define PROJFPE_RNG_HPP

#include <cstdint>

namespace projfpe {

// Counter-based uniform generator: draw k of stream s under seed is the
// SplitMix64 finalizer applied to a key mixed from (seed, s) plus
// k * golden-gamma. Streams are independent by construction, so path
// simulations can hand stream i to path i and stay bit-reproducible in
// any execution order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    // uniform in (0,1); never returns 0 or 1
    double uniform();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Standard normal draws via the Box-Muller transform on CounterRng
// uniforms (pairs; the second value of each pair is cached).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}

    double normal();
    double uniform() { return rng_.uniform(); }

private:
    CounterRng rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace projfpe

#endif
