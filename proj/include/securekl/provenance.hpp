#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace securekl {

// ===== run provenance =====
//
// Every CLI run stamps its output with the command, the engine version,
// and all result-affecting parameters, so any output can be replayed
// byte-identically from its own header. Party-local transport details
// (role, addresses, local file paths in secure runs) stay out: the two
// parties of a secure run must emit identical blocks.

inline constexpr const char* kEngineVersion = "0.1.0";

struct ProvenanceBlock {
    std::string command;
    std::map<std::string, std::string> params;
};

/// FNV-1a over the canonical "command\nversion\nkey=value\n..." rendering;
/// stable across runs and platforms.
uint64_t provenance_hash(const ProvenanceBlock& block);

/// JSON object {command, version, config_hash, params}; config_hash is the
/// zero-padded hex of provenance_hash. Compact, key-sorted, deterministic.
std::string provenance_to_json(const ProvenanceBlock& block);

} // namespace securekl
