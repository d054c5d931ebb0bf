#pragma once

#include <cstdint>
#include <vector>

#include "securekl/mpc.hpp"

namespace securekl {

// ===== private logistic regression =====
//
// Mini-batch SGD over additively shared data. Nothing about the data is
// revealed except (optionally) a per-epoch scalar loss used for early
// stopping, and whatever the caller later chooses to open.

struct SgdHyperparams {
    double learning_rate = 0.0974;
    int patience = 5;          // early-stopping epochs without improvement
    double tolerance = 0.000132;
    double momentum = 0.907;
    double weight_decay = 8.14e-7;
    double dampening = 0.0545;
    int max_epochs = 30;
    int batch_size = 64;
};

/// Tuned defaults for training under shares / in the clear. The two paths
/// are tuned independently and must not share a config.
SgdHyperparams secure_sgd_defaults();
SgdHyperparams plain_sgd_defaults();

/// Throws ConfigInvalid on out-of-range fields.
void validate_hyperparams(const SgdHyperparams& hp);

struct SecureModel {
    SharedTensor weights;              // [d x 1], bias folded in as a column
    FixedPointConfig cfg;
    std::vector<double> training_log;  // opened per-epoch loss; empty in strict mode
};

struct SecureTrainOptions {
    uint64_t shuffle_seed = 0;  // public; both parties must pass the same value
    /// Never open epoch losses; always run exactly max_epochs.
    bool strict = false;
    /// Publicly known count of positive labels (membership labels come from
    /// public row provenance). SIZE_MAX skips the degenerate-class check.
    size_t known_positive_count = SIZE_MAX;
};

/// Elementwise logistic function on a shared tensor. Exact sign extraction
/// folds the argument into (-inf, 0]; there exp(x) ~ (1 + x/2^8)^(2^8) by
/// eight squarings and 1/(1+exp) by ten Newton steps, so every
/// intermediate stays in [-4, 4] regardless of the input's sign.
/// Accurate to ~1e-2 for |z| <= 16 and saturates cleanly far beyond that.
SharedTensor secure_sigmoid(PartySession& s, const SharedTensor& z);

/// Trains on X [n x d] (features pre-scaled to [0,1], bias column included)
/// against labels [n x 1] in {0,1}. Gradient X^T(sigmoid(Xw) - y)/batch with
/// momentum, dampening and weight decay; batches by a publicly seeded
/// permutation; zero-initialized weights. Unless strict, the epoch loss
/// (mean squared error, opened as a scalar) drives early stopping.
SecureModel secure_logreg_train(PartySession& s, const SharedTensor& X,
                                const SharedTensor& labels, const SgdHyperparams& hp,
                                const SecureTrainOptions& opt);

/// Mean of sigmoid(X_src * w) over rows, opened as a single scalar (the
/// only value tagged `final` in a scoring run).
double secure_mean_score(PartySession& s, const SecureModel& model, const SharedTensor& X_src);

} // namespace securekl
