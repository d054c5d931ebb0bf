#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "securekl/fixed_point.hpp"
#include "securekl/rng.hpp"
#include "securekl/trace.hpp"
#include "securekl/transport.hpp"

namespace securekl {

// ===== two-party additive sharing with a trusted dealer =====
//
// Model: semi-honest parties P0 and P1 hold additive shares over Z_{2^64};
// a dealer (third role) provides correlated randomness (Beaver triples,
// bitwise AND triples, bit/arithmetic share pairs) and never sees data.
// Every interactive op below is written from one party's perspective and
// must be called by both parties in the same order.

// --- correlated randomness ---

enum class TripleKind : uint8_t {
    none = 0,         // end-of-session marker
    elementwise = 1,  // n word triples a*b=c in the ring
    matmul = 2,       // A [rows x inner], B [inner x 1], C = A*B
    bit_and = 3,      // n word triples a&b=c, XOR-shared
    dabit = 4,        // n random bits, shared both as XOR bits and ring values
};

struct TripleRequest {
    TripleKind kind = TripleKind::none;
    uint64_t rows = 0;   // element count, or matmul rows
    uint64_t inner = 0;  // matmul inner dimension (0 otherwise)

    bool operator==(const TripleRequest&) const = default;
};

std::vector<uint64_t> serialize_request(const TripleRequest& r);
TripleRequest deserialize_request(const std::vector<uint64_t>& words);

/// Words one party receives for a request (see Dealer::generate for layout).
size_t triple_words_per_party(const TripleRequest& r);

/// Generates both parties' correlated-randomness shares from one seed.
class Dealer {
public:
    explicit Dealer(uint64_t seed) : rng_(seed) {}

    /// Returns {party0 words, party1 words}.
    ///   elementwise n : a(n) b(n) c(n)
    ///   matmul r,k    : A(r*k) B(k) C(r)
    ///   bit_and n     : a(n) b(n) c(n)         (XOR shares)
    ///   dabit n       : bit(n) ring(n)          (bit in LSB; ring value is bit << frac_bits)
    std::pair<std::vector<uint64_t>, std::vector<uint64_t>> generate(const TripleRequest& r,
                                                                     unsigned frac_bits = 16);

private:
    Rng rng_;
};

/// Serves one session over two party channels until both send a
/// TripleKind::none request. Throws ProtocolDesync if their request
/// streams ever disagree.
void run_dealer_session(Channel& chan_a, Channel& chan_b, uint64_t seed);

/// Where a party gets its correlated randomness from.
class TripleSource {
public:
    virtual ~TripleSource() = default;
    virtual std::vector<uint64_t> next(const TripleRequest& r) = 0;
    virtual void finish() {}
};

/// Online source: forwards requests to a dealer over a channel.
class DealerChannelSource final : public TripleSource {
public:
    DealerChannelSource(int role, uint32_t session, Channel& ch, TraceRecorder* trace);
    std::vector<uint64_t> next(const TripleRequest& r) override;
    void finish() override;

private:
    int role_;
    uint32_t session_;
    Channel& ch_;
    TraceRecorder* trace_;
    bool finished_ = false;
};

// --- shared tensors and explicit triples ---

/// One party's additive share of a tensor. The shape is public.
struct SharedTensor {
    RingTensor share;

    size_t rows() const { return share.rows; }
    size_t cols() const { return share.cols; }
    size_t size() const { return share.size(); }
};

/// Explicit one-shot Beaver triples (my shares). Consumed exactly once.
struct BeaverTriple {
    RingTensor a, b, c;
    bool used = false;
};

struct MatmulTriple {
    RingTensor a, b, c;  // a: [rows x inner], b: [inner x 1], c: [rows x 1]
    bool used = false;
};

// --- local share algebra (no communication; both parties apply alike) ---

SharedTensor st_add(const SharedTensor& a, const SharedTensor& b);
SharedTensor st_sub(const SharedTensor& a, const SharedTensor& b);
SharedTensor st_neg(const SharedTensor& a);
SharedTensor st_take_rows(const SharedTensor& a, const std::vector<size_t>& idx);
SharedTensor st_transpose(const SharedTensor& a);
SharedTensor st_sum(const SharedTensor& a);  // [1 x 1] sum of all elements

// ===== one party's session =====

struct SessionParams {
    uint32_t session_id = 0;
    uint64_t seed = 0;        // session seed; party rng derives from (seed, role)
    FixedPointConfig fx{};
};

class PartySession {
public:
    /// `peer` carries party<->party traffic; `triples` supplies correlated
    /// randomness; `trace` records reveals and traffic (shared with the
    /// dealer channel so byte counts cover everything). All three must
    /// outlive the session.
    PartySession(int role, const SessionParams& params, Channel& peer, TripleSource& triples,
                 TraceRecorder& trace);

    /// Exchange and compare a public header (run parameters). Throws
    /// SessionMismatch if the parties disagree.
    void handshake(const std::vector<uint64_t>& public_header);

    // -- share creation --
    SharedTensor share_own(const RingTensor& value);          // I hold the cleartext
    SharedTensor recv_shared(size_t rows, size_t cols);       // peer holds the cleartext
    SharedTensor share_public(const RingTensor& value) const; // both know the cleartext

    // -- public-constant arithmetic (local) --
    SharedTensor add_public(const SharedTensor& a, double v) const;
    /// share * round(c * 2^frac) followed by local truncation.
    SharedTensor scale_public(const SharedTensor& a, double c) const;
    /// Like scale_public but the constant is carried at 30 fractional bits
    /// (then truncated back), for small constants such as 1/n that a
    /// 16-bit encoding would mangle. Requires |value * c| well below the
    /// ring bound so the pre-truncation product cannot wrap.
    SharedTensor scale_public_hi(const SharedTensor& a, double c) const;
    /// share * m + encode(add); integer m keeps the scale, so no truncation.
    SharedTensor affine_int(const SharedTensor& a, int64_t m, double add) const;

    // -- interactive ops (both parties must call in lockstep) --
    SharedTensor mul(const SharedTensor& x, const SharedTensor& y);
    SharedTensor mul_with_triple(const SharedTensor& x, const SharedTensor& y, BeaverTriple& t);
    SharedTensor matmul(const SharedTensor& x, const SharedTensor& y);
    SharedTensor matmul_with_triple(const SharedTensor& x, const SharedTensor& y, MatmulTriple& t);

    /// Fixed-point-encoded indicator of "decoded value < 0", elementwise.
    SharedTensor ltz(const SharedTensor& x);

    /// Reveal a tensor to both parties. Every reveal is tagged.
    RingTensor open(const SharedTensor& x, OpenTag tag);

    BeaverTriple fetch_elementwise_triple(size_t n);
    MatmulTriple fetch_matmul_triple(size_t rows, size_t inner);

    /// Local probabilistic truncation by frac_bits (role-asymmetric shift).
    void trunc_inplace(SharedTensor& a) const;
    /// Same mechanism, arbitrary bit count.
    void trunc_bits_inplace(SharedTensor& a, unsigned bits) const;

    void finish();  // release the triple source (idempotent)

    int role() const { return role_; }
    const FixedPointConfig& fx() const { return params_.fx; }
    uint32_t session_id() const { return params_.session_id; }
    TraceRecorder& trace() { return trace_; }

private:
    uint32_t fresh_id() { return next_tensor_id_++; }
    void send_words(Opcode op, uint32_t tensor, const std::vector<uint64_t>& words);
    std::vector<uint64_t> recv_words(Opcode op, uint32_t tensor, size_t expect);
    /// Symmetric reveal of my words; role 0 sends first. Combiner is + or ^.
    std::vector<uint64_t> exchange_open(const std::vector<uint64_t>& mine, bool xor_combine,
                                        OpenTag tag, size_t logical_elems);
    std::vector<uint64_t> and_words(const std::vector<uint64_t>& x, const std::vector<uint64_t>& y);

    int role_;
    SessionParams params_;
    Channel& peer_;
    TripleSource& triples_;
    Rng rng_;
    TraceRecorder& trace_;
    uint32_t next_tensor_id_ = 1;
    bool finished_ = false;
};

} // namespace securekl
