#include "lqg/rng.hpp"

#include <cmath>
#include <numbers>

namespace lqg {

namespace {

uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t CounterRng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double CounterRng::next_uniform() {
    // 53-bit mantissa, shifted to exclude exactly 0 and 1
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::next_gaussian() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix CounterRng::gaussian_vector(int n) {
    Matrix v(n, 1);
    for (int i = 0; i < n; ++i) v[i] = next_gaussian();
    return v;
}

uint64_t CounterRng::derive(uint64_t key, uint64_t tag) {
    return mix64(key ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
}

}  // namespace lqg
