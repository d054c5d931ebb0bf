#pragma once

#include <cstdint>
#include <vector>

#include "securekl/dataset.hpp"
#include "securekl/divergence.hpp"

namespace securekl {

// ===== direct KL estimate via low-dimensional kernel densities =====
//
// A plaintext baseline for the classifier-based scores: z-normalise the
// pooled rows, project onto the top principal components, fit a Gaussian
// KDE per side, and average log(p_src / p_tgt) over source points. Only
// sensible for small d; quoted for d up to ~15.

struct KdeOptions {
    size_t n_components = 3;       // clamped to d when d is smaller
    /// Candidate bandwidths; empty = 10 log-spaced values in [0.05, 1.0].
    std::vector<double> bandwidth_grid;
    size_t cv_folds = 5;
    uint64_t seed = 0;             // cross-validation fold shuffling
    /// Estimates this far below zero are treated as Monte-Carlo noise and
    /// floored; anything in [-mc_slack, 0) clips to itself (KL >= 0 in truth).
    double mc_slack = 0.05;
};

/// Requires at least 50 rows per side (TooFewSamples) and equal feature
/// dimension (DimensionMismatch). SingularCovariance only if the pooled
/// covariance resists eigendecomposition even after a 1e-6 ridge.
DivergenceScore kde_kl(const SiteDataset& src, const SiteDataset& tgt,
                       const KdeOptions& opt = {});

} // namespace securekl
