#include "securekl/rng.hpp"

#include <cmath>
#include <numbers>

#include "securekl/errors.hpp"

namespace securekl {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t mix64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a(const std::string& s, uint64_t seed) {
    return fnv1a(s.data(), s.size(), seed);
}

uint64_t derive_seed(uint64_t master, uint64_t tag) {
    uint64_t s = master ^ (0x6a09e667f3bcc909ULL + tag);
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

uint64_t derive_seed(uint64_t master, const std::string& tag) {
    return derive_seed(master, fnv1a(tag));
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw Error("Rng::below: n must be positive");
    // rejection sampling over the largest multiple of n
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = eng_();
    } while (x >= limit);
    return x % n;
}

double Rng::uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log() stays finite
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::vector<size_t> Rng::permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
    if (k > n) throw Error("sample_without_replacement: k > n");
    // partial Fisher-Yates: first k entries of a permutation
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(below(n - i));
        std::swap(p[i], p[j]);
    }
    p.resize(k);
    return p;
}

} // namespace securekl
