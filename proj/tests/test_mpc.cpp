#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "securekl/bits.hpp"
#include "securekl/errors.hpp"
#include "securekl/mpc.hpp"
#include "securekl/rng.hpp"
#include "securekl/secure_session.hpp"
#include "securekl/special.hpp"

using namespace securekl;

namespace {

// Random double that is exactly representable at 16 fractional bits, so
// protocol error measurements are not polluted by input quantization.
double on_grid(Rng& rng, double lo, double hi) {
    double step = 1.0 / 65536.0;
    auto n = static_cast<uint64_t>((hi - lo) / step);
    return lo + static_cast<double>(rng.below(n + 1)) * step;
}

SessionParams test_params(uint32_t id, uint64_t seed) {
    SessionParams p;
    p.session_id = id;
    p.seed = seed;
    return p;
}

} // namespace

TEST_SUITE("mpc") {

TEST_CASE("triple request serialization round trips") {
    for (TripleRequest r : {TripleRequest{TripleKind::elementwise, 17, 0},
                            TripleRequest{TripleKind::matmul, 64, 9},
                            TripleRequest{TripleKind::bit_and, 3, 0},
                            TripleRequest{TripleKind::dabit, 128, 0},
                            TripleRequest{TripleKind::none, 0, 0}}) {
        CHECK(deserialize_request(serialize_request(r)) == r);
    }
    CHECK(triple_words_per_party({TripleKind::elementwise, 10, 0}) == 30);
    CHECK(triple_words_per_party({TripleKind::matmul, 5, 3}) == 5 * 3 + 3 + 5);
    CHECK(triple_words_per_party({TripleKind::bit_and, 7, 0}) == 21);
    CHECK(triple_words_per_party({TripleKind::dabit, 6, 0}) == 12);
}

TEST_CASE("dealer emits consistent correlated randomness") {
    Dealer d(0x5eed);

    SUBCASE("elementwise triples satisfy a*b=c in the ring") {
        auto [p0, p1] = d.generate({TripleKind::elementwise, 64, 0});
        REQUIRE(p0.size() == 192);
        REQUIRE(p1.size() == 192);
        for (size_t i = 0; i < 64; ++i) {
            uint64_t a = p0[i] + p1[i];
            uint64_t b = p0[64 + i] + p1[64 + i];
            uint64_t c = p0[128 + i] + p1[128 + i];
            CHECK(a * b == c);
        }
    }

    SUBCASE("matmul triples satisfy C = A*B") {
        size_t r = 5, k = 3;
        auto [p0, p1] = d.generate({TripleKind::matmul, r, k});
        REQUIRE(p0.size() == r * k + k + r);
        for (size_t i = 0; i < r; ++i) {
            uint64_t acc = 0;
            for (size_t j = 0; j < k; ++j) {
                uint64_t a = p0[i * k + j] + p1[i * k + j];
                uint64_t b = p0[r * k + j] + p1[r * k + j];
                acc += a * b;
            }
            CHECK(acc == p0[r * k + k + i] + p1[r * k + k + i]);
        }
    }

    SUBCASE("bit triples satisfy a&b=c under XOR sharing") {
        auto [p0, p1] = d.generate({TripleKind::bit_and, 32, 0});
        for (size_t i = 0; i < 32; ++i) {
            uint64_t a = p0[i] ^ p1[i];
            uint64_t b = p0[32 + i] ^ p1[32 + i];
            uint64_t c = p0[64 + i] ^ p1[64 + i];
            CHECK((a & b) == c);
        }
    }

    SUBCASE("dabits pair an XOR bit with its scaled arithmetic share") {
        auto [p0, p1] = d.generate({TripleKind::dabit, 256, 0}, 16);
        for (size_t i = 0; i < 256; ++i) {
            uint64_t bit = p0[i] ^ p1[i];
            CHECK(bit <= 1);
            CHECK(p0[256 + i] + p1[256 + i] == bit << 16);
        }
    }

    SUBCASE("same seed reproduces identical output") {
        Dealer d1(42), d2(42);
        TripleRequest r{TripleKind::elementwise, 16, 0};
        CHECK(d1.generate(r) == d2.generate(r));
    }
}

TEST_CASE("secret sharing reconstructs exactly and shares look uniform") {
    Rng rng(101);
    size_t n = 16384;
    RingTensor clear(n, 1);
    for (auto& w : clear.data) w = rng.u64();

    RingTensor opened0, opened1;
    RingTensor share1;
    run_two_party_inprocess(
        test_params(7, 2024),
        [&](PartySession& s) {
            auto x = s.share_own(clear);
            opened0 = s.open(x, OpenTag::data);
        },
        [&](PartySession& s) {
            auto x = s.recv_shared(n, 1);
            share1 = x.share;
            opened1 = s.open(x, OpenTag::data);
        });

    CHECK(opened0.data == clear.data);
    CHECK(opened1.data == clear.data);

    // Party 1 never saw the cleartext; its share must be indistinguishable
    // from uniform. Chi-square over the top byte, 256 bins, df = 255.
    std::vector<size_t> bins(256, 0);
    for (uint64_t w : share1.data) bins[w >> 56]++;
    double expect = static_cast<double>(n) / 256.0;
    double chi2 = 0.0;
    for (size_t b : bins) {
        double dlt = static_cast<double>(b) - expect;
        chi2 += dlt * dlt / expect;
    }
    CHECK(chi2_sf(chi2, 255) > 1e-3);
}

TEST_CASE("local share algebra mirrors plaintext tensor ops") {
    Rng rng(55);
    size_t r = 4, c = 3;
    RingTensor x = rt_encode({1.5, -2.0, 0.25, 3.0, -0.5, 7.0, 0.0, 1.0, -1.0, 2.5, -3.5, 4.0}, r, c);
    RingTensor y(r, c);
    for (auto& w : y.data) w = fx_encode(on_grid(rng, -4, 4));

    RingTensor sum, diff, neg, transposed, rows02, total;
    run_two_party_inprocess(
        test_params(8, 77),
        [&](PartySession& s) {
            auto sx = s.share_own(x);
            auto sy = s.share_own(y);
            sum = s.open(st_add(sx, sy), OpenTag::data);
            diff = s.open(st_sub(sx, sy), OpenTag::data);
            neg = s.open(st_neg(sx), OpenTag::data);
            transposed = s.open(st_transpose(sx), OpenTag::data);
            rows02 = s.open(st_take_rows(sx, {0, 2}), OpenTag::data);
            total = s.open(st_sum(sx), OpenTag::data);
        },
        [&](PartySession& s) {
            auto sx = s.recv_shared(r, c);
            auto sy = s.recv_shared(r, c);
            s.open(st_add(sx, sy), OpenTag::data);
            s.open(st_sub(sx, sy), OpenTag::data);
            s.open(st_neg(sx), OpenTag::data);
            s.open(st_transpose(sx), OpenTag::data);
            s.open(st_take_rows(sx, {0, 2}), OpenTag::data);
            s.open(st_sum(sx), OpenTag::data);
        });

    CHECK(sum.data == rt_add(x, y).data);
    CHECK(diff.data == rt_sub(x, y).data);
    CHECK(neg.data == rt_neg(x).data);
    REQUIRE(transposed.rows == c);
    REQUIRE(transposed.cols == r);
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) CHECK(transposed.at(j, i) == x.at(i, j));
    REQUIRE(rows02.rows == 2);
    CHECK(rows02.at(0, 1) == x.at(0, 1));
    CHECK(rows02.at(1, 1) == x.at(2, 1));
    uint64_t acc = 0;
    for (uint64_t w : x.data) acc += w;
    CHECK(total.at(0, 0) == acc);
}

TEST_CASE("public-constant arithmetic is correct") {
    Rng rng(9);
    size_t n = 64;
    std::vector<double> xs(n);
    for (auto& v : xs) v = on_grid(rng, -10, 10);
    RingTensor x = rt_encode(xs, n, 1);

    RingTensor shifted, scaled, affine;
    run_two_party_inprocess(
        test_params(9, 123),
        [&](PartySession& s) {
            auto sx = s.share_own(x);
            shifted = s.open(s.add_public(sx, 1.5), OpenTag::data);
            scaled = s.open(s.scale_public(sx, 0.25), OpenTag::data);
            affine = s.open(s.affine_int(sx, -2, 3.0), OpenTag::data);
        },
        [&](PartySession& s) {
            auto sx = s.recv_shared(n, 1);
            shifted = s.open(s.add_public(sx, 1.5), OpenTag::data);
            scaled = s.open(s.scale_public(sx, 0.25), OpenTag::data);
            affine = s.open(s.affine_int(sx, -2, 3.0), OpenTag::data);
        });

    auto sh = rt_decode(shifted);
    auto sc = rt_decode(scaled);
    auto af = rt_decode(affine);
    for (size_t i = 0; i < n; ++i) {
        CHECK(sh[i] == xs[i] + 1.5);  // exact: everything stays on the grid
        CHECK(std::fabs(sc[i] - 0.25 * xs[i]) <= std::ldexp(1.0, -14));
        CHECK(af[i] == -2.0 * xs[i] + 3.0);  // integer scale: exact
    }
}

TEST_CASE("beaver multiplication matches plaintext products") {
    Rng rng(31337);
    size_t n = 256;
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = on_grid(rng, -8, 8);
        ys[i] = on_grid(rng, -8, 8);
    }
    RingTensor xt = rt_encode(xs, n, 1);
    RingTensor yt = rt_encode(ys, n, 1);

    RingTensor opened;
    TraceRecorder t0, t1;
    run_two_party_inprocess(
        test_params(10, 5150),
        [&](PartySession& s) {
            auto x = s.share_own(xt);
            auto y = s.share_own(yt);
            opened = s.open(s.mul(x, y), OpenTag::data);
        },
        [&](PartySession& s) {
            auto x = s.recv_shared(n, 1);
            auto y = s.recv_shared(n, 1);
            s.open(s.mul(x, y), OpenTag::data);
        },
        false, &t0, &t1);

    auto got = rt_decode(opened);
    double tol = std::ldexp(1.0, -14);  // one rescale: <= 2 ulp at 16 frac bits
    for (size_t i = 0; i < n; ++i) CHECK(std::fabs(got[i] - xs[i] * ys[i]) <= tol);

    // exactly one masked difference reveal, one data reveal, per party
    CHECK(t0.open_count(OpenTag::mask) == 1);
    CHECK(t0.open_count(OpenTag::data) == 1);
    CHECK(t1.open_count(OpenTag::mask) == 1);
}

TEST_CASE("shared matrix-vector product matches plaintext") {
    Rng rng(777);
    size_t n = 32, k = 16;
    std::vector<double> xv(n * k), wv(k);
    for (auto& v : xv) v = on_grid(rng, -2, 2);
    for (auto& v : wv) v = on_grid(rng, -1, 1);
    RingTensor X = rt_encode(xv, n, k);
    RingTensor w = rt_encode(wv, k, 1);

    RingTensor opened;
    run_two_party_inprocess(
        test_params(11, 31415),
        [&](PartySession& s) {
            auto sx = s.share_own(X);
            auto sw = s.share_own(w);
            opened = s.open(s.matmul(sx, sw), OpenTag::data);
        },
        [&](PartySession& s) {
            auto sx = s.recv_shared(n, k);
            auto sw = s.recv_shared(k, 1);
            s.open(s.matmul(sx, sw), OpenTag::data);
        });

    auto got = rt_decode(opened);
    double tol = std::ldexp(1.0, -13);
    for (size_t i = 0; i < n; ++i) {
        double want = 0;
        for (size_t j = 0; j < k; ++j) want += xv[i * k + j] * wv[j];
        CHECK(std::fabs(got[i] - want) <= tol);
    }
}

TEST_CASE("kogge-stone reference matches native addition") {
    Rng rng(2718);
    for (int i = 0; i < 100000; ++i) {
        uint64_t a = rng.u64(), b = rng.u64();
        CHECK(plain_add_msb(a, b) == plain_sum_sign(a, b));
    }
    // carry chains across the whole word
    CHECK(plain_add_msb(~0ULL, 1) == 0);
    CHECK(plain_add_msb(0x7fffffffffffffffULL, 1) == 1);
    CHECK(plain_add_msb(1ULL << 63, 0) == 1);
    CHECK(plain_add_msb(0, 0) == 0);
}

TEST_CASE("secure sign extraction is exact") {
    Rng rng(404);
    size_t n = 128;
    std::vector<double> xs(n);
    for (size_t i = 0; i < n; ++i) xs[i] = on_grid(rng, -100, 100);
    // edge cases: zero, +/- one ulp, large magnitudes
    xs[0] = 0.0;
    xs[1] = 1.0 / 65536.0;
    xs[2] = -1.0 / 65536.0;
    xs[3] = 104.0;
    xs[4] = -104.0;
    xs[5] = 0.5;
    xs[6] = -0.5;
    RingTensor xt = rt_encode(xs, n, 1);

    RingTensor opened;
    TraceRecorder t0, t1;
    run_two_party_inprocess(
        test_params(12, 999),
        [&](PartySession& s) {
            auto x = s.share_own(xt);
            opened = s.open(s.ltz(x), OpenTag::data);
        },
        [&](PartySession& s) {
            auto x = s.recv_shared(n, 1);
            s.open(s.ltz(x), OpenTag::data);
        },
        false, &t0, &t1);

    for (size_t i = 0; i < n; ++i) {
        uint64_t want = xs[i] < 0 ? (1ULL << 16) : 0;  // exact fixed-point 0/1
        CHECK(opened.data[i] == want);
    }
    // sign extraction reveals only masked values
    CHECK(t0.open_count(OpenTag::data) == 1);
    CHECK(t0.open_count(OpenTag::mask) == t1.open_count(OpenTag::mask));
    CHECK(t0.open_count(OpenTag::mask) >= 6);  // one per adder level at least
}

TEST_CASE("explicit triples cannot be consumed twice") {
    RingTensor xt = rt_encode({1.0, 2.0}, 2, 1);
    CHECK_THROWS_AS(run_two_party_inprocess(
                        test_params(13, 1),
                        [&](PartySession& s) {
                            auto x = s.share_own(xt);
                            auto t = s.fetch_elementwise_triple(2);
                            s.mul_with_triple(x, x, t);
                            s.mul_with_triple(x, x, t);
                        },
                        [&](PartySession& s) {
                            auto x = s.recv_shared(2, 1);
                            auto t = s.fetch_elementwise_triple(2);
                            s.mul_with_triple(x, x, t);
                            s.mul_with_triple(x, x, t);
                        }),
                    TripleReuse);
}

TEST_CASE("mismatched opens desynchronize the protocol") {
    std::atomic<bool> saw_desync{false};
    RingTensor a3 = rt_encode({1, 2, 3}, 3, 1);
    RingTensor a2 = rt_encode({1, 2}, 2, 1);
    CHECK_THROWS_AS(run_two_party_inprocess(
                        test_params(14, 2),
                        [&](PartySession& s) {
                            auto x = s.share_own(a3);
                            auto y = s.recv_shared(2, 1);
                            s.open(x, OpenTag::data);  // 3 words
                        },
                        [&](PartySession& s) {
                            auto x = s.recv_shared(3, 1);
                            auto y = s.share_own(a2);
                            try {
                                s.open(y, OpenTag::data);  // 2 words; peer sent 3
                            } catch (const ProtocolDesync&) {
                                saw_desync = true;
                                throw;
                            }
                        }),
                    Error);
    CHECK(saw_desync);
}

TEST_CASE("handshake rejects disagreeing run parameters") {
    CHECK_THROWS_AS(run_two_party_inprocess(
                        test_params(15, 3),
                        [&](PartySession& s) { s.handshake({1, 2, 3}); },
                        [&](PartySession& s) { s.handshake({1, 2, 4}); }),
                    SessionMismatch);
}

TEST_CASE("matching handshakes succeed") {
    run_two_party_inprocess(
        test_params(16, 4),
        [&](PartySession& s) { s.handshake({9, 9, 9}); },
        [&](PartySession& s) { s.handshake({9, 9, 9}); });
}

TEST_CASE("reveal tags count reveals by purpose") {
    RingTensor xt = rt_encode({0.5, -1.25, 2.0, -3.0}, 4, 1);
    TraceRecorder t0, t1;
    run_two_party_inprocess(
        test_params(17, 5),
        [&](PartySession& s) {
            auto x = s.share_own(xt);
            auto sq = s.mul(x, x);
            s.open(sq, OpenTag::loss);
            s.open(st_sum(sq), OpenTag::final_score);
        },
        [&](PartySession& s) {
            auto x = s.recv_shared(4, 1);
            auto sq = s.mul(x, x);
            s.open(sq, OpenTag::loss);
            s.open(st_sum(sq), OpenTag::final_score);
        },
        false, &t0, &t1);

    for (const TraceRecorder* t : {&t0, &t1}) {
        CHECK(t->open_count(OpenTag::mask) == 1);
        CHECK(t->open_count(OpenTag::loss) == 1);
        CHECK(t->open_count(OpenTag::final_score) == 1);
        CHECK(t->open_count(OpenTag::data) == 0);
        CHECK(t->total_opens() == 3);
    }
}

TEST_CASE("transcripts are deterministic and role-distinct") {
    RingTensor xt = rt_encode({1.0, -2.0, 3.5, 0.25}, 4, 1);
    auto run_once = [&](TraceRecorder& t0, TraceRecorder& t1) {
        run_two_party_inprocess(
            test_params(18, 606),
            [&](PartySession& s) {
                auto x = s.share_own(xt);
                auto y = s.mul(x, x);
                auto z = s.ltz(x);
                s.open(st_add(y, z), OpenTag::final_score);
            },
            [&](PartySession& s) {
                auto x = s.recv_shared(4, 1);
                auto y = s.mul(x, x);
                auto z = s.ltz(x);
                s.open(st_add(y, z), OpenTag::final_score);
            },
            false, &t0, &t1);
    };
    TraceRecorder a0, a1, b0, b1;
    run_once(a0, a1);
    run_once(b0, b1);

    CHECK(a0.sent_transcript_hash() == b0.sent_transcript_hash());
    CHECK(a1.sent_transcript_hash() == b1.sent_transcript_hash());
    CHECK(a0.sent_transcript_hash() != a1.sent_transcript_hash());
    CHECK(a0.bytes_sent() == b0.bytes_sent());
    CHECK(a1.bytes_sent() == b1.bytes_sent());
    CHECK(a0.frames_sent() == b0.frames_sent());
}

TEST_CASE("shape mismatches are rejected locally") {
    CHECK_THROWS_AS(run_two_party_inprocess(
                        test_params(19, 6),
                        [&](PartySession& s) {
                            auto x = s.share_own(rt_encode({1, 2}, 2, 1));
                            auto y = s.share_own(rt_encode({1, 2, 3}, 3, 1));
                            st_add(x, y);
                        },
                        [&](PartySession& s) {
                            auto x = s.recv_shared(2, 1);
                            auto y = s.recv_shared(3, 1);
                            st_add(x, y);
                        }),
                    ShapeMismatch);
}

} // TEST_SUITE
