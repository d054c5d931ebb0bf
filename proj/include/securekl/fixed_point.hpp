#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace securekl {

// ===== fixed-point arithmetic over Z_{2^64} =====
//
// Reals are scaled by 2^frac_bits and live in the 64-bit ring in two's
// complement. All wrap-around is intentional; overflow past the
// representable bound B = 2^(64 - frac_bits - 1) is the caller's problem
// (encode() checks it, ring ops never do).

struct FixedPointConfig {
    unsigned ring_bits = 64;   // only 64 is supported; kept for the record
    unsigned frac_bits = 16;

    /// Representable magnitude bound B = 2^(ring_bits - frac_bits - 1).
    double bound() const { return static_cast<double>(1ULL << (ring_bits - frac_bits - 1)); }
};

inline constexpr FixedPointConfig kDefaultFx{};

/// Scale and round half away from zero; throws OverflowError if |x| >= B.
uint64_t fx_encode(double x, const FixedPointConfig& cfg = kDefaultFx);

/// Two's-complement interpretation divided by 2^frac_bits.
double fx_decode(uint64_t u, const FixedPointConfig& cfg = kDefaultFx);

/// Full-width 128-bit product followed by an arithmetic shift right by
/// frac_bits. Exact for in-range operands up to rounding toward -inf.
uint64_t fx_mul(uint64_t a, uint64_t b, const FixedPointConfig& cfg = kDefaultFx);

/// Arithmetic right shift of the signed interpretation by frac_bits
/// (rescales a double-scale product back to single scale).
uint64_t fx_trunc(uint64_t a, const FixedPointConfig& cfg = kDefaultFx);

// ===== RingTensor =====

/// Dense row-major tensor of ring elements. rank 1 tensors have cols == 1.
struct RingTensor {
    size_t rows = 0;
    size_t cols = 1;
    std::vector<uint64_t> data;

    RingTensor() = default;
    RingTensor(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0) {}

    size_t size() const { return data.size(); }
    uint64_t& at(size_t r, size_t c) { return data[r * cols + c]; }
    uint64_t at(size_t r, size_t c) const { return data[r * cols + c]; }

    bool same_shape(const RingTensor& o) const { return rows == o.rows && cols == o.cols; }
};

/// Elementwise ring ops (wrapping); shapes must match.
RingTensor rt_add(const RingTensor& a, const RingTensor& b);
RingTensor rt_sub(const RingTensor& a, const RingTensor& b);
RingTensor rt_neg(const RingTensor& a);
RingTensor rt_mul_elem(const RingTensor& a, const RingTensor& b);   // raw ring product (no rescale)
RingTensor rt_scale(const RingTensor& a, uint64_t s);               // raw ring product by scalar

/// Ring matrix product [n x d] * [d x m] -> [n x m] (no rescale).
RingTensor rt_matmul(const RingTensor& a, const RingTensor& b);

/// Encode / decode a whole tensor.
RingTensor rt_encode(const std::vector<double>& x, size_t rows, size_t cols,
                     const FixedPointConfig& cfg = kDefaultFx);
std::vector<double> rt_decode(const RingTensor& t, const FixedPointConfig& cfg = kDefaultFx);

/// Elementwise fixed-point product with rescale (fx_mul per element).
RingTensor rt_fx_mul(const RingTensor& a, const RingTensor& b,
                     const FixedPointConfig& cfg = kDefaultFx);

/// Truncate every element by frac_bits (arithmetic shift).
RingTensor rt_fx_trunc(const RingTensor& a, const FixedPointConfig& cfg = kDefaultFx);

} // namespace securekl
