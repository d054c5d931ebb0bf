#pragma once

#include <functional>

#include "securekl/mpc.hpp"

namespace securekl {

// ===== in-process execution of a full two-party + dealer session =====
//
// This is the default way tests and the library run the protocol: all
// three roles in one process on in-memory channels, driving exactly the
// same PartySession code the two-process TCP mode uses, so transcripts
// match bit for bit across the two deployments.

/// Runs both party callbacks plus a dealer; blocks until done. finish() is
/// called for the parties after their callbacks return. The first party
/// exception (party 0 preferred) is rethrown. Traces are copied to the
/// out-params when non-null.
void run_two_party_inprocess(const SessionParams& params,
                             const std::function<void(PartySession&)>& party0,
                             const std::function<void(PartySession&)>& party1,
                             bool record_trace_events = false,
                             TraceRecorder* trace0_out = nullptr,
                             TraceRecorder* trace1_out = nullptr);

} // namespace securekl
