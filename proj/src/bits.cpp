#include "securekl/bits.hpp"

#include "securekl/errors.hpp"
#include "securekl/mpc.hpp"

namespace securekl {

uint64_t plain_add_msb(uint64_t x, uint64_t y) {
    uint64_t g = x & y;
    uint64_t p = x ^ y;
    uint64_t p0 = p;
    for (unsigned s = 1; s < 64; s <<= 1) {
        uint64_t gs = g << s;
        uint64_t ps = p << s;
        g = g ^ (p & gs);
        p = p & ps;
    }
    // carry into bit 63 is the prefix-generate of bits [0..62]
    return ((p0 >> 63) ^ (g >> 62)) & 1;
}

// ===== secure bit ops (PartySession members) =====

std::vector<uint64_t> PartySession::and_words(const std::vector<uint64_t>& x,
                                              const std::vector<uint64_t>& y) {
    if (x.size() != y.size()) throw ShapeMismatch("and_words: length mismatch");
    size_t n = x.size();
    auto words = triples_.next({TripleKind::bit_and, n, 0});
    const uint64_t* ta = words.data();
    const uint64_t* tb = words.data() + n;
    const uint64_t* tc = words.data() + 2 * n;

    // masked differences under XOR; uniform, safe to open
    std::vector<uint64_t> masked(2 * n);
    for (size_t i = 0; i < n; ++i) masked[i] = x[i] ^ ta[i];
    for (size_t i = 0; i < n; ++i) masked[n + i] = y[i] ^ tb[i];
    auto opened = exchange_open(masked, /*xor=*/true, OpenTag::mask, 2 * n);

    std::vector<uint64_t> z(n);
    for (size_t i = 0; i < n; ++i) {
        uint64_t d = opened[i], e = opened[n + i];
        uint64_t acc = tc[i] ^ (d & tb[i]) ^ (e & ta[i]);
        if (role_ == 0) acc ^= d & e;
        z[i] = acc;
    }
    return z;
}

SharedTensor PartySession::ltz(const SharedTensor& x) {
    size_t n = x.size();

    // The two arithmetic shares are added inside a shared-bit adder; the
    // sum's top bit is the sign. Each element's 64 bit positions are packed
    // into one word, so shifts below move across bit positions, not
    // elements. XOR-sharing of my-share bits is trivial: I contribute my
    // words, the peer contributes zeros (and vice versa).
    std::vector<uint64_t> a_sh(n, 0), b_sh(n, 0);
    if (role_ == 0) {
        a_sh = x.share.data;
    } else {
        b_sh = x.share.data;
    }

    std::vector<uint64_t> g = and_words(a_sh, b_sh);
    std::vector<uint64_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = a_sh[i] ^ b_sh[i];
    std::vector<uint64_t> p0 = p;  // propagate plane before the prefix scan

    for (unsigned s = 1; s < 64; s <<= 1) {
        // one batched AND per level: [p & (g<<s), p & (p<<s)]
        std::vector<uint64_t> lhs(2 * n), rhs(2 * n);
        for (size_t i = 0; i < n; ++i) {
            lhs[i] = p[i];
            lhs[n + i] = p[i];
            rhs[i] = g[i] << s;
            rhs[n + i] = p[i] << s;
        }
        auto r = and_words(lhs, rhs);
        for (size_t i = 0; i < n; ++i) {
            g[i] ^= r[i];
            p[i] = r[n + i];
        }
    }

    // sign bit, still XOR-shared, one bit per element
    std::vector<uint64_t> w(n);
    for (size_t i = 0; i < n; ++i) w[i] = ((p0[i] >> 63) ^ (g[i] >> 62)) & 1;

    // bit -> arithmetic via a shared random bit r known in both domains:
    // open c = w xor r, then [w] = c + (1-2c)[r]
    auto words = triples_.next({TripleKind::dabit, n, 0});
    const uint64_t* rbit = words.data();
    const uint64_t* rring = words.data() + n;

    std::vector<uint64_t> cw(n);
    for (size_t i = 0; i < n; ++i) cw[i] = w[i] ^ (rbit[i] & 1);
    auto c = exchange_open(cw, /*xor=*/true, OpenTag::mask, n);

    SharedTensor out;
    out.share = RingTensor(x.rows(), x.cols());
    uint64_t one = uint64_t(1) << params_.fx.frac_bits;
    for (size_t i = 0; i < n; ++i) {
        uint64_t bit = c[i] & 1;
        uint64_t v = bit ? (0 - rring[i]) : rring[i];
        if (role_ == 0 && bit) v += one;
        out.share.data[i] = v;
    }
    return out;
}

} // namespace securekl
