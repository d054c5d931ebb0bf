#include "securekl/fixed_point.hpp"

#include <cmath>
#include <string>

#include "securekl/errors.hpp"

namespace securekl {

uint64_t fx_encode(double x, const FixedPointConfig& cfg) {
    if (!std::isfinite(x) || std::fabs(x) >= cfg.bound()) {
        throw OverflowError("fx_encode: |" + std::to_string(x) + "| >= 2^" +
                            std::to_string(cfg.ring_bits - cfg.frac_bits - 1));
    }
    double scaled = x * static_cast<double>(1ULL << cfg.frac_bits);
    // round half away from zero, then reduce into the ring
    double r = (scaled < 0.0) ? -std::floor(-scaled + 0.5) : std::floor(scaled + 0.5);
    auto as_int = static_cast<int64_t>(r);
    return static_cast<uint64_t>(as_int);
}

double fx_decode(uint64_t u, const FixedPointConfig& cfg) {
    auto s = static_cast<int64_t>(u);
    return static_cast<double>(s) / static_cast<double>(1ULL << cfg.frac_bits);
}

uint64_t fx_mul(uint64_t a, uint64_t b, const FixedPointConfig& cfg) {
    auto p = static_cast<__int128>(static_cast<int64_t>(a)) *
             static_cast<__int128>(static_cast<int64_t>(b));
    p >>= cfg.frac_bits;  // arithmetic shift (rounds toward -inf)
    return static_cast<uint64_t>(static_cast<int64_t>(p));
}

uint64_t fx_trunc(uint64_t a, const FixedPointConfig& cfg) {
    return static_cast<uint64_t>(static_cast<int64_t>(a) >> cfg.frac_bits);
}

// ===== tensor ops =====

namespace {
void require_same_shape(const RingTensor& a, const RingTensor& b, const char* who) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(who) + ": " + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols));
    }
}
} // namespace

RingTensor rt_add(const RingTensor& a, const RingTensor& b) {
    require_same_shape(a, b, "rt_add");
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    return out;
}

RingTensor rt_sub(const RingTensor& a, const RingTensor& b) {
    require_same_shape(a, b, "rt_sub");
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
    return out;
}

RingTensor rt_neg(const RingTensor& a) {
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = ~a.data[i] + 1;
    return out;
}

RingTensor rt_mul_elem(const RingTensor& a, const RingTensor& b) {
    require_same_shape(a, b, "rt_mul_elem");
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

RingTensor rt_scale(const RingTensor& a, uint64_t s) {
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * s;
    return out;
}

RingTensor rt_matmul(const RingTensor& a, const RingTensor& b) {
    if (a.cols != b.rows) {
        throw ShapeMismatch("rt_matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                            " * " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    RingTensor out(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        for (size_t k = 0; k < a.cols; ++k) {
            uint64_t aik = a.at(i, k);
            if (aik == 0) continue;
            for (size_t j = 0; j < b.cols; ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

RingTensor rt_encode(const std::vector<double>& x, size_t rows, size_t cols,
                     const FixedPointConfig& cfg) {
    if (x.size() != rows * cols) throw ShapeMismatch("rt_encode: buffer/shape disagree");
    RingTensor out(rows, cols);
    for (size_t i = 0; i < x.size(); ++i) out.data[i] = fx_encode(x[i], cfg);
    return out;
}

std::vector<double> rt_decode(const RingTensor& t, const FixedPointConfig& cfg) {
    std::vector<double> out(t.size());
    for (size_t i = 0; i < t.size(); ++i) out[i] = fx_decode(t.data[i], cfg);
    return out;
}

RingTensor rt_fx_mul(const RingTensor& a, const RingTensor& b, const FixedPointConfig& cfg) {
    require_same_shape(a, b, "rt_fx_mul");
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = fx_mul(a.data[i], b.data[i], cfg);
    return out;
}

RingTensor rt_fx_trunc(const RingTensor& a, const FixedPointConfig& cfg) {
    RingTensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = fx_trunc(a.data[i], cfg);
    return out;
}

} // namespace securekl
