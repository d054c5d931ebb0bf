#include "securekl/secure_session.hpp"

#include <exception>
#include <thread>
#include <utility>

#include "securekl/errors.hpp"

namespace securekl {

void run_two_party_inprocess(const SessionParams& params,
                             const std::function<void(PartySession&)>& party0,
                             const std::function<void(PartySession&)>& party1,
                             bool record_trace_events, TraceRecorder* trace0_out,
                             TraceRecorder* trace1_out) {
    auto [p0_peer, p1_peer] = make_inproc_pair();
    auto [p0_dealer, dealer_c0] = make_inproc_pair();
    auto [p1_dealer, dealer_c1] = make_inproc_pair();

    std::exception_ptr err0, err1, err_dealer;

    // Each thread owns its channel endpoints: whether it returns or throws,
    // unwinding closes them and unblocks the other roles.
    auto party_thread = [&](int role, std::unique_ptr<Channel> peer,
                            std::unique_ptr<Channel> dealer_chan,
                            const std::function<void(PartySession&)>& body,
                            std::exception_ptr& err, TraceRecorder* trace_out) {
        try {
            TraceRecorder trace(record_trace_events);
            DealerChannelSource triples(role, params.session_id, *dealer_chan, &trace);
            PartySession session(role, params, *peer, triples, trace);
            body(session);
            session.finish();
            if (trace_out) *trace_out = trace;
        } catch (...) {
            err = std::current_exception();
        }
    };

    std::thread t_dealer([&, c0 = std::move(dealer_c0), c1 = std::move(dealer_c1)]() mutable {
        try {
            run_dealer_session(*c0, *c1, derive_seed(params.seed, "dealer"));
        } catch (...) {
            err_dealer = std::current_exception();
        }
    });
    std::thread t0([&, peer = std::move(p0_peer), dc = std::move(p0_dealer)]() mutable {
        party_thread(0, std::move(peer), std::move(dc), party0, err0, trace0_out);
    });
    std::thread t1([&, peer = std::move(p1_peer), dc = std::move(p1_dealer)]() mutable {
        party_thread(1, std::move(peer), std::move(dc), party1, err1, trace1_out);
    });

    t0.join();
    t1.join();
    t_dealer.join();

    if (err0) std::rethrow_exception(err0);
    if (err1) std::rethrow_exception(err1);
    // a dealer failure only matters if the parties did not already explain it
    if (err_dealer) std::rethrow_exception(err_dealer);
}

} // namespace securekl
