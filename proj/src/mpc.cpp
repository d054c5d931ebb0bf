#include "securekl/mpc.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "securekl/errors.hpp"

namespace securekl {

// ===== correlated randomness =====

std::vector<uint64_t> serialize_request(const TripleRequest& r) {
    return {static_cast<uint64_t>(r.kind), r.rows, r.inner};
}

TripleRequest deserialize_request(const std::vector<uint64_t>& words) {
    if (words.size() != 3) throw ProtocolDesync("triple request must be 3 words");
    TripleRequest r;
    r.kind = static_cast<TripleKind>(words[0]);
    r.rows = words[1];
    r.inner = words[2];
    return r;
}

size_t triple_words_per_party(const TripleRequest& r) {
    switch (r.kind) {
        case TripleKind::none: return 0;
        case TripleKind::elementwise: return 3 * r.rows;
        case TripleKind::matmul: return r.rows * r.inner + r.inner + r.rows;
        case TripleKind::bit_and: return 3 * r.rows;
        case TripleKind::dabit: return 2 * r.rows;
    }
    throw ProtocolDesync("unknown triple kind");
}

std::pair<std::vector<uint64_t>, std::vector<uint64_t>> Dealer::generate(const TripleRequest& r,
                                                                         unsigned frac_bits) {
    std::vector<uint64_t> p0, p1;
    auto share_out = [&](uint64_t full) {
        uint64_t s0 = rng_.u64();
        p0.push_back(s0);
        p1.push_back(full - s0);
    };
    auto xor_share_out = [&](uint64_t full) {
        uint64_t s0 = rng_.u64();
        p0.push_back(s0);
        p1.push_back(full ^ s0);
    };

    switch (r.kind) {
        case TripleKind::elementwise: {
            size_t n = r.rows;
            std::vector<uint64_t> a(n), b(n);
            for (auto& v : a) v = rng_.u64();
            for (auto& v : b) v = rng_.u64();
            for (size_t i = 0; i < n; ++i) share_out(a[i]);
            for (size_t i = 0; i < n; ++i) share_out(b[i]);
            for (size_t i = 0; i < n; ++i) share_out(a[i] * b[i]);
            break;
        }
        case TripleKind::matmul: {
            size_t rows = r.rows, k = r.inner;
            RingTensor A(rows, k), B(k, 1);
            for (auto& v : A.data) v = rng_.u64();
            for (auto& v : B.data) v = rng_.u64();
            RingTensor C = rt_matmul(A, B);
            for (uint64_t v : A.data) share_out(v);
            for (uint64_t v : B.data) share_out(v);
            for (uint64_t v : C.data) share_out(v);
            break;
        }
        case TripleKind::bit_and: {
            size_t n = r.rows;
            std::vector<uint64_t> a(n), b(n);
            for (auto& v : a) v = rng_.u64();
            for (auto& v : b) v = rng_.u64();
            for (size_t i = 0; i < n; ++i) xor_share_out(a[i]);
            for (size_t i = 0; i < n; ++i) xor_share_out(b[i]);
            for (size_t i = 0; i < n; ++i) xor_share_out(a[i] & b[i]);
            break;
        }
        case TripleKind::dabit: {
            size_t n = r.rows;
            std::vector<uint64_t> bits(n);
            for (auto& v : bits) v = rng_.u64() & 1;
            for (size_t i = 0; i < n; ++i) xor_share_out(bits[i]);
            for (size_t i = 0; i < n; ++i) share_out(bits[i] << frac_bits);
            break;
        }
        case TripleKind::none:
            break;
    }
    return {std::move(p0), std::move(p1)};
}

void run_dealer_session(Channel& chan_a, Channel& chan_b, uint64_t seed) {
    // hello frames identify roles; the two connections may arrive in either order
    std::vector<uint8_t> pa, pb;
    FrameHeader ha = chan_a.recv(pa);
    FrameHeader hb = chan_b.recv(pb);
    if (ha.opcode != uint8_t(Opcode::hello) || hb.opcode != uint8_t(Opcode::hello)) {
        throw ProtocolDesync("dealer expected hello frames");
    }
    if (ha.session != hb.session) {
        throw SessionMismatch("dealer: parties joined different sessions (" +
                              std::to_string(ha.session) + " vs " + std::to_string(hb.session) + ")");
    }
    auto role_of = [](const std::vector<uint8_t>& p) {
        auto w = unpack_words(p);
        if (w.empty() || w[0] > 1) throw ProtocolDesync("dealer hello must carry a role word");
        return int(w[0]);
    };
    int role_a = role_of(pa);
    int role_b = role_of(pb);
    if (role_a + role_b != 1) throw ProtocolDesync("dealer needs one party per role");
    Channel& c0 = role_a == 0 ? chan_a : chan_b;
    Channel& c1 = role_a == 0 ? chan_b : chan_a;

    Dealer dealer(seed);
    uint32_t session = ha.session;
    while (true) {
        std::vector<uint8_t> q0, q1;
        FrameHeader h0 = c0.recv(q0);
        FrameHeader h1 = c1.recv(q1);
        if (h0.opcode != uint8_t(Opcode::triple_req) || h1.opcode != uint8_t(Opcode::triple_req)) {
            throw ProtocolDesync("dealer expected triple requests");
        }
        TripleRequest r0 = deserialize_request(unpack_words(q0));
        TripleRequest r1 = deserialize_request(unpack_words(q1));
        if (!(r0 == r1)) throw ProtocolDesync("parties requested different correlated randomness");
        if (r0.kind == TripleKind::none) break;

        auto [s0, s1] = dealer.generate(r0);
        FrameHeader out;
        out.opcode = uint8_t(Opcode::triple_data);
        out.session = session;
        out.tensor = h0.tensor;
        auto b0 = pack_words(s0);
        auto b1 = pack_words(s1);
        c0.send(out, b0.data(), b0.size());
        c1.send(out, b1.data(), b1.size());
    }
}

DealerChannelSource::DealerChannelSource(int role, uint32_t session, Channel& ch,
                                         TraceRecorder* trace)
    : role_(role), session_(session), ch_(ch), trace_(trace) {
    FrameHeader h;
    h.opcode = uint8_t(Opcode::hello);
    h.session = session_;
    auto payload = pack_words({static_cast<uint64_t>(role_)});
    ch_.send(h, payload.data(), payload.size());
    if (trace_) trace_->on_send(h.opcode, session_, 0, payload.data(), payload.size());
}

std::vector<uint64_t> DealerChannelSource::next(const TripleRequest& r) {
    FrameHeader h;
    h.opcode = uint8_t(Opcode::triple_req);
    h.session = session_;
    auto payload = pack_words(serialize_request(r));
    ch_.send(h, payload.data(), payload.size());
    if (trace_) trace_->on_send(h.opcode, session_, 0, payload.data(), payload.size());

    std::vector<uint8_t> resp;
    FrameHeader rh = ch_.recv(resp);
    if (rh.opcode != uint8_t(Opcode::triple_data)) throw ProtocolDesync("expected triple data");
    if (rh.session != session_) throw SessionMismatch("dealer answered for another session");
    if (trace_) trace_->on_recv(rh.opcode, rh.session, rh.tensor, resp.data(), resp.size());
    auto words = unpack_words(resp);
    if (words.size() != triple_words_per_party(r)) {
        throw ProtocolDesync("dealer sent " + std::to_string(words.size()) + " words, expected " +
                             std::to_string(triple_words_per_party(r)));
    }
    return words;
}

void DealerChannelSource::finish() {
    if (finished_) return;
    finished_ = true;
    FrameHeader h;
    h.opcode = uint8_t(Opcode::triple_req);
    h.session = session_;
    auto payload = pack_words(serialize_request({TripleKind::none, 0, 0}));
    ch_.send(h, payload.data(), payload.size());
    if (trace_) trace_->on_send(h.opcode, session_, 0, payload.data(), payload.size());
}

// ===== local share algebra =====

SharedTensor st_add(const SharedTensor& a, const SharedTensor& b) { return {rt_add(a.share, b.share)}; }
SharedTensor st_sub(const SharedTensor& a, const SharedTensor& b) { return {rt_sub(a.share, b.share)}; }
SharedTensor st_neg(const SharedTensor& a) { return {rt_neg(a.share)}; }

SharedTensor st_take_rows(const SharedTensor& a, const std::vector<size_t>& idx) {
    RingTensor out(idx.size(), a.share.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.share.rows) throw ShapeMismatch("st_take_rows: index out of range");
        for (size_t c = 0; c < a.share.cols; ++c) out.at(i, c) = a.share.at(idx[i], c);
    }
    return {out};
}

SharedTensor st_transpose(const SharedTensor& a) {
    RingTensor out(a.share.cols, a.share.rows);
    for (size_t r = 0; r < a.share.rows; ++r)
        for (size_t c = 0; c < a.share.cols; ++c) out.at(c, r) = a.share.at(r, c);
    return {out};
}

SharedTensor st_sum(const SharedTensor& a) {
    RingTensor out(1, 1);
    uint64_t acc = 0;
    for (uint64_t v : a.share.data) acc += v;
    out.data[0] = acc;
    return {out};
}

// ===== party session =====

PartySession::PartySession(int role, const SessionParams& params, Channel& peer,
                           TripleSource& triples, TraceRecorder& trace)
    : role_(role),
      params_(params),
      peer_(peer),
      triples_(triples),
      rng_(derive_seed(params.seed, role == 0 ? "party0" : "party1")),
      trace_(trace) {
    if (role_ != 0 && role_ != 1) throw ConfigInvalid("role must be 0 or 1");
}

void PartySession::send_words(Opcode op, uint32_t tensor, const std::vector<uint64_t>& words) {
    FrameHeader h;
    h.opcode = uint8_t(op);
    h.session = params_.session_id;
    h.tensor = tensor;
    auto payload = pack_words(words);
    peer_.send(h, payload.data(), payload.size());
    trace_.on_send(h.opcode, h.session, tensor, payload.data(), payload.size());
}

std::vector<uint64_t> PartySession::recv_words(Opcode op, uint32_t tensor, size_t expect) {
    std::vector<uint8_t> payload;
    FrameHeader h = peer_.recv(payload);
    trace_.on_recv(h.opcode, h.session, h.tensor, payload.data(), payload.size());
    if (h.session != params_.session_id) {
        throw SessionMismatch("frame for session " + std::to_string(h.session) + " in session " +
                              std::to_string(params_.session_id));
    }
    if (h.opcode != uint8_t(op)) {
        throw ProtocolDesync("expected opcode " + std::to_string(int(op)) + ", got " +
                             std::to_string(int(h.opcode)));
    }
    if (h.tensor != tensor) {
        throw ProtocolDesync("peer opened tensor " + std::to_string(h.tensor) + ", I opened " +
                             std::to_string(tensor));
    }
    auto words = unpack_words(payload);
    if (words.size() != expect) {
        throw ProtocolDesync("expected " + std::to_string(expect) + " words, got " +
                             std::to_string(words.size()));
    }
    return words;
}

void PartySession::handshake(const std::vector<uint64_t>& public_header) {
    // Both sides must get the peer's header before anyone compares, or a
    // mismatch would strand the peer mid-recv instead of raising cleanly.
    uint32_t id = fresh_id();
    auto recv_hello = [&]() {
        std::vector<uint8_t> payload;
        FrameHeader h = peer_.recv(payload);
        trace_.on_recv(h.opcode, h.session, h.tensor, payload.data(), payload.size());
        if (h.opcode != uint8_t(Opcode::hello)) throw ProtocolDesync("expected hello");
        if (h.session != params_.session_id) throw SessionMismatch("hello for another session");
        return unpack_words(payload);
    };
    std::vector<uint64_t> theirs;
    if (role_ == 0) {
        send_words(Opcode::hello, id, public_header);
        theirs = recv_hello();
    } else {
        theirs = recv_hello();
        send_words(Opcode::hello, id, public_header);
    }
    if (theirs != public_header) throw SessionMismatch("parties disagree on run parameters");
}

SharedTensor PartySession::share_own(const RingTensor& value) {
    uint32_t id = fresh_id();
    // peer's share is a fresh uniform mask; mine is value - mask
    RingTensor mask(value.rows, value.cols);
    for (auto& v : mask.data) v = rng_.u64();
    send_words(Opcode::tensor, id, mask.data);
    return {rt_sub(value, mask)};
}

SharedTensor PartySession::recv_shared(size_t rows, size_t cols) {
    uint32_t id = fresh_id();
    auto words = recv_words(Opcode::tensor, id, rows * cols);
    RingTensor share(rows, cols);
    share.data = std::move(words);
    return {share};
}

SharedTensor PartySession::share_public(const RingTensor& value) const {
    if (role_ == 0) return {value};
    RingTensor zero(value.rows, value.cols);
    return {zero};
}

SharedTensor PartySession::add_public(const SharedTensor& a, double v) const {
    if (role_ != 0) return a;
    SharedTensor out = a;
    uint64_t enc = fx_encode(v, params_.fx);
    for (auto& x : out.share.data) x += enc;
    return out;
}

SharedTensor PartySession::scale_public(const SharedTensor& a, double c) const {
    SharedTensor out{rt_scale(a.share, fx_encode(c, params_.fx))};
    trunc_inplace(out);
    return out;
}

SharedTensor PartySession::affine_int(const SharedTensor& a, int64_t m, double add) const {
    SharedTensor out{rt_scale(a.share, static_cast<uint64_t>(m))};
    if (role_ == 0 && add != 0.0) {
        uint64_t enc = fx_encode(add, params_.fx);
        for (auto& x : out.share.data) x += enc;
    }
    return out;
}

void PartySession::trunc_inplace(SharedTensor& a) const {
    trunc_bits_inplace(a, params_.fx.frac_bits);
}

void PartySession::trunc_bits_inplace(SharedTensor& a, unsigned bits) const {
    if (role_ == 0) {
        for (auto& v : a.share.data) v >>= bits;
    } else {
        for (auto& v : a.share.data) v = ~(((~v) + 1) >> bits) + 1;  // -((-v) >> bits)
    }
}

SharedTensor PartySession::scale_public_hi(const SharedTensor& a, double c) const {
    auto m = static_cast<uint64_t>(static_cast<int64_t>(std::llround(std::ldexp(c, 30))));
    SharedTensor out{rt_scale(a.share, m)};
    trunc_bits_inplace(out, 30);
    return out;
}

std::vector<uint64_t> PartySession::exchange_open(const std::vector<uint64_t>& mine,
                                                  bool xor_combine, OpenTag tag,
                                                  size_t logical_elems) {
    uint32_t id = fresh_id();
    std::vector<uint64_t> theirs;
    if (role_ == 0) {
        send_words(Opcode::open_share, id, mine);
        theirs = recv_words(Opcode::open_share, id, mine.size());
    } else {
        theirs = recv_words(Opcode::open_share, id, mine.size());
        send_words(Opcode::open_share, id, mine);
    }
    std::vector<uint64_t> out(mine.size());
    if (xor_combine) {
        for (size_t i = 0; i < mine.size(); ++i) out[i] = mine[i] ^ theirs[i];
    } else {
        for (size_t i = 0; i < mine.size(); ++i) out[i] = mine[i] + theirs[i];
    }
    trace_.on_open(tag, params_.session_id, id, logical_elems);
    return out;
}

RingTensor PartySession::open(const SharedTensor& x, OpenTag tag) {
    auto words = exchange_open(x.share.data, /*xor=*/false, tag, x.size());
    RingTensor out(x.rows(), x.cols());
    out.data = std::move(words);
    return out;
}

BeaverTriple PartySession::fetch_elementwise_triple(size_t n) {
    auto words = triples_.next({TripleKind::elementwise, n, 0});
    BeaverTriple t;
    t.a = RingTensor(n, 1);
    t.b = RingTensor(n, 1);
    t.c = RingTensor(n, 1);
    std::copy(words.begin(), words.begin() + n, t.a.data.begin());
    std::copy(words.begin() + n, words.begin() + 2 * n, t.b.data.begin());
    std::copy(words.begin() + 2 * n, words.end(), t.c.data.begin());
    return t;
}

MatmulTriple PartySession::fetch_matmul_triple(size_t rows, size_t inner) {
    auto words = triples_.next({TripleKind::matmul, rows, inner});
    MatmulTriple t;
    t.a = RingTensor(rows, inner);
    t.b = RingTensor(inner, 1);
    t.c = RingTensor(rows, 1);
    std::copy(words.begin(), words.begin() + rows * inner, t.a.data.begin());
    std::copy(words.begin() + rows * inner, words.begin() + rows * inner + inner, t.b.data.begin());
    std::copy(words.begin() + rows * inner + inner, words.end(), t.c.data.begin());
    return t;
}

SharedTensor PartySession::mul_with_triple(const SharedTensor& x, const SharedTensor& y,
                                           BeaverTriple& t) {
    if (!x.share.same_shape(y.share)) throw ShapeMismatch("mul: operand shapes differ");
    if (x.size() != t.a.size()) throw ShapeMismatch("mul: triple sized for another tensor");
    if (t.used) throw TripleReuse("elementwise Beaver triple consumed twice");
    t.used = true;

    size_t n = x.size();
    // masked differences: eps = x - a, delta = y - b (both uniform, safe to open)
    std::vector<uint64_t> masked(2 * n);
    for (size_t i = 0; i < n; ++i) masked[i] = x.share.data[i] - t.a.data[i];
    for (size_t i = 0; i < n; ++i) masked[n + i] = y.share.data[i] - t.b.data[i];
    auto opened = exchange_open(masked, /*xor=*/false, OpenTag::mask, 2 * n);

    SharedTensor z;
    z.share = RingTensor(x.rows(), x.cols());
    for (size_t i = 0; i < n; ++i) {
        uint64_t eps = opened[i], delta = opened[n + i];
        uint64_t acc = t.c.data[i] + eps * t.b.data[i] + delta * t.a.data[i];
        if (role_ == 0) acc += eps * delta;
        z.share.data[i] = acc;
    }
    trunc_inplace(z);
    return z;
}

SharedTensor PartySession::mul(const SharedTensor& x, const SharedTensor& y) {
    auto t = fetch_elementwise_triple(x.size());
    return mul_with_triple(x, y, t);
}

SharedTensor PartySession::matmul_with_triple(const SharedTensor& x, const SharedTensor& y,
                                              MatmulTriple& t) {
    if (x.cols() != y.rows() || y.cols() != 1) {
        throw ShapeMismatch("matmul: need [n x d] * [d x 1], got " + std::to_string(x.rows()) + "x" +
                            std::to_string(x.cols()) + " * " + std::to_string(y.rows()) + "x" +
                            std::to_string(y.cols()));
    }
    if (t.a.rows != x.rows() || t.a.cols != x.cols()) {
        throw ShapeMismatch("matmul: triple sized for another shape");
    }
    if (t.used) throw TripleReuse("matmul Beaver triple consumed twice");
    t.used = true;

    size_t n = x.rows(), k = x.cols();
    std::vector<uint64_t> masked(n * k + k);
    for (size_t i = 0; i < n * k; ++i) masked[i] = x.share.data[i] - t.a.data[i];
    for (size_t i = 0; i < k; ++i) masked[n * k + i] = y.share.data[i] - t.b.data[i];
    auto opened = exchange_open(masked, /*xor=*/false, OpenTag::mask, masked.size());

    RingTensor eps(n, k), delta(k, 1);
    std::copy(opened.begin(), opened.begin() + n * k, eps.data.begin());
    std::copy(opened.begin() + n * k, opened.end(), delta.data.begin());

    // z = c + eps*b + a*delta (+ eps*delta on one side)
    RingTensor z = t.c;
    RingTensor eb = rt_matmul(eps, t.b);
    RingTensor ad = rt_matmul(t.a, delta);
    for (size_t i = 0; i < n; ++i) z.data[i] += eb.data[i] + ad.data[i];
    if (role_ == 0) {
        RingTensor ed = rt_matmul(eps, delta);
        for (size_t i = 0; i < n; ++i) z.data[i] += ed.data[i];
    }
    SharedTensor out{z};
    trunc_inplace(out);
    return out;
}

SharedTensor PartySession::matmul(const SharedTensor& x, const SharedTensor& y) {
    auto t = fetch_matmul_triple(x.rows(), x.cols());
    return matmul_with_triple(x, y, t);
}

void PartySession::finish() {
    if (finished_) return;
    finished_ = true;
    triples_.finish();
}

} // namespace securekl
