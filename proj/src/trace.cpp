#include "securekl/trace.hpp"

#include "securekl/rng.hpp"

namespace securekl {

const char* open_tag_name(OpenTag tag) {
    switch (tag) {
        case OpenTag::mask: return "mask";
        case OpenTag::loss: return "loss";
        case OpenTag::final_score: return "final";
        case OpenTag::data: return "data";
    }
    return "?";
}

void TraceRecorder::on_send(uint8_t opcode, uint32_t session, uint32_t tensor,
                            const void* payload, size_t len) {
    bytes_sent_ += len;
    ++frames_sent_;
    uint64_t pf = fnv1a(payload, len);
    // chain header fields and payload hash into the transcript hash
    uint64_t hdr = (uint64_t(opcode) << 32) ^ (uint64_t(session) << 40) ^ tensor ^ (uint64_t(len) << 8);
    sent_hash_ = fnv1a(&hdr, sizeof hdr, sent_hash_);
    sent_hash_ = fnv1a(&pf, sizeof pf, sent_hash_);
    if (record_events_) {
        events_.push_back({seq_++, 's', opcode, session, tensor, static_cast<uint32_t>(len), pf, -1});
    }
}

void TraceRecorder::on_recv(uint8_t opcode, uint32_t session, uint32_t tensor,
                            const void* payload, size_t len) {
    bytes_received_ += len;
    if (record_events_) {
        events_.push_back({seq_++, 'r', opcode, session, tensor, static_cast<uint32_t>(len),
                           fnv1a(payload, len), -1});
    }
}

void TraceRecorder::on_open(OpenTag tag, uint32_t session, uint32_t tensor, size_t element_count) {
    open_counts_[static_cast<size_t>(tag)]++;
    if (record_events_) {
        events_.push_back({seq_++, 'o', 0, session, tensor, static_cast<uint32_t>(element_count),
                           0, static_cast<int>(tag)});
    }
}

size_t TraceRecorder::total_opens() const {
    size_t n = 0;
    for (size_t c : open_counts_) n += c;
    return n;
}

void TraceRecorder::write_jsonl(std::ostream& os) const {
    for (const auto& e : events_) {
        os << "{\"seq\":" << e.seq << ",\"dir\":\"" << e.dir << "\"";
        if (e.dir == 'o') {
            os << ",\"tag\":\"" << open_tag_name(static_cast<OpenTag>(e.open_tag)) << "\""
               << ",\"tensor\":" << e.tensor << ",\"elems\":" << e.payload_len;
        } else {
            os << ",\"op\":" << int(e.opcode) << ",\"tensor\":" << e.tensor
               << ",\"len\":" << e.payload_len << ",\"fnv\":" << e.payload_fnv;
        }
        os << ",\"session\":" << e.session << "}\n";
    }
}

} // namespace securekl
