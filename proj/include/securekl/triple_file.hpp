#pragma once

#include <string>
#include <vector>

#include "securekl/mpc.hpp"

namespace securekl {

// ===== offline correlated randomness =====
//
// The dealer can run ahead of time and leave each party a file:
//
//   8-byte magic "SKLTRP01"
//   u64 record count
//   records: u64 kind, u64 rows, u64 inner, then that party's share words
//
// everything little-endian. A score run later consumes the records in
// order; a run may leave a tail unused (schedules are sized for the worst
// case), but shape or order mismatches are fatal.

inline constexpr char kTripleFileMagic[8] = {'S', 'K', 'L', 'T', 'R', 'P', '0', '1'};

/// Generate both parties' files for a fixed request schedule.
void write_triple_files(const std::string& path_party0, const std::string& path_party1,
                        uint64_t dealer_seed, const std::vector<TripleRequest>& schedule);

class FileTripleSource final : public TripleSource {
public:
    explicit FileTripleSource(const std::string& path);

    std::vector<uint64_t> next(const TripleRequest& r) override;

    size_t records_left() const { return requests_.size() - cursor_; }

private:
    std::vector<TripleRequest> requests_;
    std::vector<std::vector<uint64_t>> words_;
    size_t cursor_ = 0;
};

} // namespace securekl
