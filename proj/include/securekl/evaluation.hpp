#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "securekl/dataset.hpp"
#include "securekl/divergence.hpp"
#include "securekl/plain_ml.hpp"
#include "securekl/strategies.hpp"

namespace securekl {

// ===== ground-truth evaluation =====
//
// Did the chosen partners actually help? Train the downstream model with
// and without the acquired data and read the AUC difference (delta), then
// check that the private score ranking agrees with the plaintext one.

/// Trainer settings for the ground-truth models: full-batch gradient
/// descent run to convergence. Full batches make the fitted model a
/// function of the empirical data distribution alone — duplicating rows
/// changes nothing — so delta measures data value, not batching noise.
SgdHyperparams downstream_sgd_defaults();

struct StrategyOutcome {
    std::string source_id;
    StrategySpec strategy;
    std::vector<std::string> selected;
    double auc_baseline = 0.0;
    double auc_combined = 0.0;
    double delta = 0.0;  // always auc_combined - auc_baseline
    size_t folds = 0;
    size_t repeats = 0;
    uint64_t seed = 0;
};

struct DeltaEvalConfig {
    size_t folds = 5;
    size_t repeats = 5;
    /// Row budgets per model: at most this many source training rows, the
    /// same cap again for every selected site, and this many held-out
    /// source rows per test fold.
    size_t train_budget = 1500;
    size_t test_budget = 400;
    /// Feature clipping bounds, matching the scoring path's scaling.
    double clip_lo = -10.0;
    double clip_hi = 10.0;
    uint64_t seed = 0;
    SgdHyperparams hp;  // downstream_sgd_defaults() unless overridden

    DeltaEvalConfig();
};

/// Logistic regression on the pooled rows of all mixture sites. Features
/// are clipped/scaled to [0,1] and a bias column is appended here, so the
/// sites arrive raw. Throws DegenerateLabels on single-class pools.
PlainModel train_downstream(const std::vector<const SiteDataset*>& mixture,
                            const SgdHyperparams& hp, uint64_t seed, double clip_lo = -10.0,
                            double clip_hi = 10.0);

/// Per-row probabilities of the positive class under the model, on
/// raw features (scaled internally with the same bounds).
std::vector<double> downstream_scores(const PlainModel& model, const SiteDataset& site,
                                      const std::vector<size_t>& rows, double clip_lo = -10.0,
                                      double clip_hi = 10.0);

/// Cross-validated AUC improvement from adding the selected sites' data.
/// Each repeat reshuffles the source into `folds` folds; the model trains
/// on the non-test folds (capped at train_budget) alone and again with up
/// to train_budget rows from every selected site, and both are scored on
/// the held-out fold. AUC averages across folds first, then repeats.
/// With no selected sites the two models are bit-identical and delta is
/// exactly zero.
StrategyOutcome delta_eval(const SiteDataset& source,
                           const std::vector<const SiteDataset*>& selected,
                           const DeltaEvalConfig& cfg);

// --- score-vector consistency ---

struct SourceConsistency {
    std::string source_id;
    double rho = 0.0;      // Spearman between the two score vectors
    double p_value = 1.0;
    bool significant = false;  // after FDR correction across sources
};

struct ConsistencyReport {
    std::vector<SourceConsistency> per_source;  // sorted by source id
    double mean_rho = 0.0;
    double min_rho = 0.0;
    double max_rho = 0.0;
    double q = 0.05;  // FDR level the flags were computed at
};

/// Per-source Spearman correlation between two score sets covering the
/// same (source, target) pairs — typically plaintext vs secure. Throws
/// MissingPairs unless the pair sets match exactly, TooShort for sources
/// with fewer than three targets.
ConsistencyReport consistency_report(const std::vector<DivergenceScore>& a,
                                     const std::vector<DivergenceScore>& b, double q = 0.05);

// --- report emission ---

/// Stable-ordered JSON array, one object per outcome; parses back exactly.
std::string outcomes_to_json(const std::vector<StrategyOutcome>& outcomes);
std::vector<StrategyOutcome> outcomes_from_json(const std::string& text);

/// Flat CSV, one row per outcome (selected ids joined with '|').
std::string outcomes_to_csv(const std::vector<StrategyOutcome>& outcomes);

/// Aggregate table: one row per (strategy, n) with mean and sample std of
/// delta across outcomes.
std::string outcomes_summary_csv(const std::vector<StrategyOutcome>& outcomes);

std::string consistency_to_json(const ConsistencyReport& rep);
std::string consistency_to_csv(const ConsistencyReport& rep);

} // namespace securekl
