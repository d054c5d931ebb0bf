#include "securekl/triple_file.hpp"

#include <cstring>
#include <fstream>

#include "securekl/errors.hpp"

namespace securekl {

namespace {

void put_u64(std::ofstream& os, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::ifstream& is, const std::string& path) {
    uint8_t b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw SchemaError("triple file truncated: " + path);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

void write_one(const std::string& path, const std::vector<TripleRequest>& schedule,
               const std::vector<std::vector<uint64_t>>& blobs) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SchemaError("cannot write triple file: " + path);
    os.write(kTripleFileMagic, 8);
    put_u64(os, schedule.size());
    for (size_t i = 0; i < schedule.size(); ++i) {
        put_u64(os, uint64_t(schedule[i].kind));
        put_u64(os, schedule[i].rows);
        put_u64(os, schedule[i].inner);
        for (uint64_t w : blobs[i]) put_u64(os, w);
    }
    if (!os) throw SchemaError("short write on triple file: " + path);
}

} // namespace

void write_triple_files(const std::string& path_party0, const std::string& path_party1,
                        uint64_t dealer_seed, const std::vector<TripleRequest>& schedule) {
    Dealer dealer(dealer_seed);
    std::vector<std::vector<uint64_t>> blobs0, blobs1;
    blobs0.reserve(schedule.size());
    blobs1.reserve(schedule.size());
    for (const auto& r : schedule) {
        auto [s0, s1] = dealer.generate(r);
        blobs0.push_back(std::move(s0));
        blobs1.push_back(std::move(s1));
    }
    write_one(path_party0, schedule, blobs0);
    write_one(path_party1, schedule, blobs1);
}

FileTripleSource::FileTripleSource(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SchemaError("cannot open triple file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kTripleFileMagic, 8) != 0) {
        throw SchemaError("bad triple file magic: " + path);
    }
    uint64_t count = get_u64(is, path);
    requests_.reserve(count);
    words_.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        TripleRequest r;
        r.kind = static_cast<TripleKind>(get_u64(is, path));
        r.rows = get_u64(is, path);
        r.inner = get_u64(is, path);
        size_t n = triple_words_per_party(r);
        std::vector<uint64_t> w(n);
        for (size_t j = 0; j < n; ++j) w[j] = get_u64(is, path);
        requests_.push_back(r);
        words_.push_back(std::move(w));
    }
}

std::vector<uint64_t> FileTripleSource::next(const TripleRequest& r) {
    if (cursor_ >= requests_.size()) {
        throw ProtocolDesync("offline triple file exhausted (schedule too small for this run)");
    }
    if (!(requests_[cursor_] == r)) {
        throw ProtocolDesync("offline triple file out of step with the protocol at record " +
                             std::to_string(cursor_));
    }
    return words_[cursor_++];
}

} // namespace securekl
