#pragma once

#include <vector>

namespace securekl {

// ===== rank statistics for the evaluation reports =====

/// Midranks (1-based; ties get the average of their rank block).
std::vector<double> midranks(const std::vector<double>& xs);

/// Mann-Whitney AUC of scores against binary labels, with midrank tie
/// handling. Throws SingleClass unless both classes are present.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

struct Correlation {
    double value = 0.0;
    double p_value = 1.0;
};

/// Spearman rank correlation. p-value by exact permutation enumeration for
/// n <= 8, otherwise by the Student-t approximation
/// t = rho sqrt((n-2)/(1-rho^2)). Throws LengthMismatch / TooShort (n < 3).
Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Pearson product-moment correlation with the same t-approximated
/// p-value. Throws LengthMismatch / TooShort / ZeroVariance.
Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Benjamini-Hochberg step-up: largest i with p_(i) <= q i/m marks all
/// smaller-or-equal ranks significant. Flags returned in input order.
std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q = 0.05);

} // namespace securekl
