#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "securekl/dataset.hpp"
#include "securekl/mpc.hpp"
#include "securekl/secure_ml.hpp"

namespace securekl {

// ===== dataset-to-dataset divergence scores =====
//
// The classifier trick: train a model to tell "my rows" from "their rows"
// and read the mean membership score over my rows. 0.5 means the datasets
// are indistinguishable; higher means the target adds little. The secure
// variants run the same recipe under the two-party protocol, opening only
// the scalar result.

enum class ScoreMethod { kl_xy, kl_x, secure_kl_xy, secure_kl_x, kde_kl };

const char* method_name(ScoreMethod m);            // "KL_XY", "SecureKL_X", ...
ScoreMethod method_from_name(const std::string& name);

struct DivergenceScore {
    std::string source_id;
    std::string target_id;
    ScoreMethod method = ScoreMethod::kl_xy;
    double value = 0.0;
    size_t k_used = 0;   // target rows actually used (after subsampling)
    uint64_t seed = 0;
};

/// JSON array of {source, target, method, value, k, seed}; stable field
/// order so reruns produce identical bytes.
std::string scores_to_json(const std::vector<DivergenceScore>& scores);
std::vector<DivergenceScore> scores_from_json(const std::string& text);
void save_scores(const std::vector<DivergenceScore>& scores, const std::string& path);
std::vector<DivergenceScore> load_scores(const std::string& path);

struct ScoreOptions {
    uint64_t seed = 0;
    /// Use only k target rows, drawn without replacement from `seed`;
    /// SIZE_MAX means all of them.
    size_t k_target = SIZE_MAX;
    /// Public per-feature clipping bounds; features map to [0,1] locally.
    double clip_lo = -10.0;
    double clip_hi = 10.0;
    /// Secure path: open nothing but the final score (no epoch losses).
    bool strict = false;
};

struct MembershipDataset {
    size_t m = 0, cols = 0;
    std::vector<double> X;  // row-major [m x cols]
    std::vector<double> I;  // 1.0 = source row, 0.0 = target row
};

/// Concatenates source rows (I=1) and target rows (I=0), optionally folds
/// the task label in as an extra feature column, and shuffles rows by the
/// public seed. Features arrive already scaled.
MembershipDataset build_membership_dataset(const SiteDataset& src, const SiteDataset& tgt,
                                           bool use_labels, uint64_t seed);

/// Clip to [lo, hi] then map to [0,1]; applied identically in the plain
/// and secure paths so their scores are comparable.
std::vector<double> scale_features_unit(const std::vector<double>& X, double lo, double hi);

// --- plaintext scorers ---

DivergenceScore kl_xy_plain(const SiteDataset& src, const SiteDataset& tgt,
                            const SgdHyperparams& hp, const ScoreOptions& opt);
DivergenceScore kl_x_plain(const SiteDataset& src, const SiteDataset& tgt,
                           const SgdHyperparams& hp, const ScoreOptions& opt);

// --- secure scorers ---
//
// Convention: role 0 owns the source site, role 1 owns the target site.
// Row counts, dimensions and the subsampling seed are public session
// facts; rows themselves are only ever exchanged as shares.

struct SecureScoreSpec {
    std::string source_id;
    std::string target_id;
    size_t n_src = 0;
    size_t n_tgt = 0;  // after subsampling
    size_t d = 0;      // raw feature dimension (before label folding)
    SgdHyperparams hp;
    ScoreOptions opt;
};

/// Each party calls this with its own site; `mine` must match the spec's
/// public count for this role. Opens one `final` scalar (plus epoch losses
/// unless opt.strict).
DivergenceScore kl_xy_secure(PartySession& s, const SiteDataset& mine,
                             const SecureScoreSpec& spec);
DivergenceScore kl_x_secure(PartySession& s, const SiteDataset& mine,
                            const SecureScoreSpec& spec);

/// Runs source and target under an in-process two-party session (plus
/// dealer) and returns the jointly opened score. Retries with a derived
/// seed if the opened score is implausible (fixed-point wrap is rare but
/// possible); deterministic, since wrap events are seed-determined.
DivergenceScore secure_score_inprocess(ScoreMethod method, const SiteDataset& src,
                                       const SiteDataset& tgt, const SgdHyperparams& hp,
                                       const ScoreOptions& opt,
                                       TraceRecorder* trace0_out = nullptr,
                                       TraceRecorder* trace1_out = nullptr);

} // namespace securekl
