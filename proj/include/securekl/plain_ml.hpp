#pragma once

#include <cstdint>
#include <vector>

#include "securekl/secure_ml.hpp"

namespace securekl {

// ===== cleartext logistic regression =====
//
// Double-precision twin of the shared-data trainer: same optimizer, same
// seeded batch permutations, same early-stopping rule, exact sigmoid.
// Used for the cleartext scoring path and as the oracle the secure
// trainer is checked against.

struct PlainModel {
    std::vector<double> weights;       // [d], bias folded in
    std::vector<double> training_log;  // per-epoch mean squared error
};

double sigmoid_exact(double z);

/// X is row-major [n x d] with the bias column already appended and
/// features scaled to [0,1]; y in {0,1}.
PlainModel plain_logreg_train(const std::vector<double>& X, size_t n, size_t d,
                              const std::vector<double>& y, const SgdHyperparams& hp,
                              uint64_t shuffle_seed);

/// Mean sigmoid(X w) over the m rows of X.
double plain_mean_score(const PlainModel& model, const std::vector<double>& X, size_t m);

} // namespace securekl
