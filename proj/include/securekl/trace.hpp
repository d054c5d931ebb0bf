#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace securekl {

// ===== protocol trace =====
//
// Every value revealed during a secure run is an "open" with a tag saying
// why it was revealed. The leakage audit is a count over these tags: a
// correct scoring run opens masked Beaver differences (`mask`), optionally
// per-epoch loss scalars (`loss`), and exactly one `final` score. Nothing
// is ever allowed to open with tag `data`.

enum class OpenTag : int { mask = 0, loss = 1, final_score = 2, data = 3 };

const char* open_tag_name(OpenTag tag);

struct TraceEvent {
    uint64_t seq = 0;
    char dir = '?';            // 's' sent, 'r' received, 'o' open
    uint8_t opcode = 0;
    uint32_t session = 0;
    uint32_t tensor = 0;
    uint32_t payload_len = 0;  // bytes (frames) or element count (opens)
    uint64_t payload_fnv = 0;
    int open_tag = -1;         // OpenTag when dir == 'o'
};

class TraceRecorder {
public:
    /// Tag/byte counters are always on; full event capture only if
    /// `record_events` (used by tests and SECUREKL_LOG dumps).
    explicit TraceRecorder(bool record_events = false) : record_events_(record_events) {}

    void on_send(uint8_t opcode, uint32_t session, uint32_t tensor,
                 const void* payload, size_t len);
    void on_recv(uint8_t opcode, uint32_t session, uint32_t tensor,
                 const void* payload, size_t len);
    void on_open(OpenTag tag, uint32_t session, uint32_t tensor, size_t element_count);

    size_t open_count(OpenTag tag) const { return open_counts_[static_cast<size_t>(tag)]; }
    size_t total_opens() const;
    uint64_t bytes_sent() const { return bytes_sent_; }
    uint64_t bytes_received() const { return bytes_received_; }
    uint64_t frames_sent() const { return frames_sent_; }

    /// Rolling FNV over everything this endpoint sent, in order. Two runs
    /// with the same seeds must agree on this hash.
    uint64_t sent_transcript_hash() const { return sent_hash_; }

    const std::vector<TraceEvent>& events() const { return events_; }

    /// One JSON object per line; deterministic (no timestamps).
    void write_jsonl(std::ostream& os) const;

private:
    bool record_events_;
    uint64_t seq_ = 0;
    std::array<size_t, 4> open_counts_{0, 0, 0, 0};
    uint64_t bytes_sent_ = 0;
    uint64_t bytes_received_ = 0;
    uint64_t frames_sent_ = 0;
    uint64_t sent_hash_ = 0xcbf29ce484222325ULL;
    std::vector<TraceEvent> events_;
};

} // namespace securekl
