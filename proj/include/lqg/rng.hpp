#pragma once

#include <cstdint>

#include "lqg/matrix.hpp"

namespace lqg {

// Counter-based pseudorandom generator (splitmix64 over a key + counter).
// Stateless per draw: output i depends only on (key, i), so streams derived
// from independent keys are reproducible regardless of scheduling order.
class CounterRng {
public:
    explicit CounterRng(uint64_t key) : key_(key) {}

    uint64_t next_u64();
    double next_uniform();   // in (0, 1), both ends excluded
    double next_gaussian();  // standard normal via Box-Muller

    // Column vector of independent standard normals.
    Matrix gaussian_vector(int n);

    // Derives an independent stream key; tags chain, so
    // derive(derive(k, a), b) gives per-(a, b) streams.
    static uint64_t derive(uint64_t key, uint64_t tag);

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace lqg
