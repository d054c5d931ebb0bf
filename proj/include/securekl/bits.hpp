#pragma once

#include <cstdint>

namespace securekl {

// Plaintext mirrors of the bit-level building blocks used by the secure
// sign extraction. Tests compare the protocol against these.

/// Carry-lookahead (Kogge-Stone) most significant bit of x + y mod 2^64,
/// computed exactly the way the shared-bit circuit computes it.
uint64_t plain_add_msb(uint64_t x, uint64_t y);

/// Sign bit of the two's-complement sum x + y mod 2^64 (reference).
inline uint64_t plain_sum_sign(uint64_t x, uint64_t y) { return (x + y) >> 63; }

} // namespace securekl
