#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "securekl/dataset.hpp"
#include "securekl/divergence.hpp"

namespace securekl {

// ===== partner-selection strategies =====
//
// Four ways to pick n data partners, trading acquisition quality against
// how much each candidate must reveal: pick blindly (nothing revealed),
// compare demographic histograms (aggregates), score a shared k-row
// sample (raw rows), or score the full datasets under the secure
// protocol (only the final scalar).

enum class StrategyKind {
    blind,         // uniform random choice, leakage zero
    demographic,   // histogram L2 distance,  leakage moderate
    subset,        // plaintext score on k shared rows, leakage high
    private_score, // secure score on full data, leakage minimal
};

const char* strategy_name(StrategyKind k);  // "blind", "demographic", ...
StrategyKind strategy_from_name(const std::string& name);
const char* leakage_tag(StrategyKind k);    // "zero" / "moderate" / "high" / "minimal"

struct StrategySpec {
    StrategyKind kind = StrategyKind::blind;
    size_t n = 1;                     // partners to select
    std::string attribute = "gender"; // demographic strategy
    /// Subset strategy: rows each candidate shares; 0 = default 1% of the
    /// (uniform) candidate size, at least 1.
    size_t k = 0;
    uint64_t seed = 0;
};

/// Uniform sample of n candidate ids without replacement, seeded.
std::vector<std::string> select_blind(const StrategySpec& spec,
                                      const std::vector<std::string>& candidate_ids);

/// Euclidean distance between the two sites' histograms for `attribute`.
double demographic_distance(const SiteDataset& src, const SiteDataset& tgt,
                            const std::string& attribute);

struct RankedCandidate {
    std::string target_id;
    double value = 0.0;  // lower = better partner
};

/// The n smallest values; equal values break lexicographically by target
/// id. Duplicate targets or n > list size raise IncompleteScores.
std::vector<std::string> select_by_score(const std::vector<RankedCandidate>& ranking, size_t n);
std::vector<std::string> select_by_score(const std::vector<DivergenceScore>& scores, size_t n);

/// One strategy run: who was picked, from what ranking, and what the
/// candidates had to reveal for it.
struct SelectionRecord {
    std::string source_id;
    StrategySpec spec;
    std::vector<std::string> selected;
    std::vector<RankedCandidate> ranking;   // empty for blind
    std::vector<DivergenceScore> scores;    // the KL-backed strategies only
    std::string leakage;                    // tag for the record
    size_t k_used = 0;                      // rows per candidate (subset strategy)
};

/// Scores every candidate (sorted by id) against the source with the
/// strategy's backend, then picks the best n. Per-pair score seeds derive
/// from spec.seed, identically for the subset and private backends, so
/// their rankings are directly comparable.
SelectionRecord run_strategy(const StrategySpec& spec, const SiteDataset& source,
                             const std::vector<SiteDataset>& candidates,
                             const SgdHyperparams& plain_hp, const SgdHyperparams& secure_hp,
                             const ScoreOptions& base_opt);

} // namespace securekl
