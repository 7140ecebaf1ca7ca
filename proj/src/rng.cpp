#include "projfpe/rng.hpp"

#include <cmath>

namespace projfpe {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

} // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
    key_ = mix64(seed + kGamma) ^ mix64(stream * 0xda942042e4dd58b5ULL + kGamma);
}

std::uint64_t CounterRng::next_u64() {
    return mix64(key_ + (++counter_) * kGamma);
}

double CounterRng::uniform() {
    // 53-bit mantissa, shifted to the open interval
    const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return u;
}

double NormalStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = rng_.uniform();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

} // namespace projfpe
