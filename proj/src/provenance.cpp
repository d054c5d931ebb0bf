#include "securekl/provenance.hpp"

#include <cstdio>

#include "json.hpp"
#include "securekl/rng.hpp"

namespace securekl {

uint64_t provenance_hash(const ProvenanceBlock& block) {
    std::string canon = block.command + "\n" + kEngineVersion + "\n";
    for (const auto& [k, v] : block.params) canon += k + "=" + v + "\n";
    return fnv1a(canon, 0);
}

std::string provenance_to_json(const ProvenanceBlock& block) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(provenance_hash(block)));
    nlohmann::json j;
    j["command"] = block.command;
    j["version"] = kEngineVersion;
    j["config_hash"] = hex;
    j["params"] = block.params;
    return j.dump(2);
}

} // namespace securekl
