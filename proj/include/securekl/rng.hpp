#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace securekl {

// ===== deterministic randomness =====
//
// Reproducibility contract: every random draw in the engine goes through
// this header. std::mt19937_64 has a standard-mandated output sequence, and
// the samplers below avoid std::*_distribution (whose streams vary between
// standard libraries), so a seed fully pins behaviour.

/// splitmix64 step; used both as a mixer and for seed derivation.
uint64_t splitmix64(uint64_t& state);

/// Stateless mix of a single value (one splitmix64 round).
uint64_t mix64(uint64_t x);

/// FNV-1a over a byte string; stable across platforms.
uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a(const std::string& s, uint64_t seed = 0xcbf29ce484222325ULL);

/// Derive a child seed from (master, tag). Children with distinct tags are
/// statistically independent streams.
uint64_t derive_seed(uint64_t master, uint64_t tag);
uint64_t derive_seed(uint64_t master, const std::string& tag);

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t u64() { return eng_(); }

    /// Uniform in [0, n) without modulo bias (rejection).
    uint64_t below(uint64_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (pair cached).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<size_t> permutation(size_t n);

    /// k distinct indices drawn from {0, ..., n-1} (order random).
    std::vector<size_t> sample_without_replacement(size_t n, size_t k);

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace securekl
