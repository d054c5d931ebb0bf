#include "securekl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "securekl/errors.hpp"
#include "securekl/special.hpp"

namespace securekl {

std::vector<double> midranks(const std::vector<double>& xs) {
    size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    return ranks;
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw LengthMismatch("scores and labels differ in length");
    }
    size_t pos = 0;
    for (int l : labels) pos += l != 0;
    size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw SingleClass("AUC needs both classes");
    auto ranks = midranks(scores);
    double rank_sum = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0) rank_sum += ranks[i];
    }
    double np = static_cast<double>(pos), nn = static_cast<double>(neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
    size_t n = xs.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw ZeroVariance("constant input has no correlation");
    return sxy / std::sqrt(sxx * syy);
}

double t_approx_p(double r, size_t n) {
    double denom = 1.0 - r * r;
    if (denom <= 0) return 0.0;  // |r| = 1: off the end of the t scale
    double t = r * std::sqrt((static_cast<double>(n) - 2.0) / denom);
    return student_t_two_sided(t, static_cast<double>(n) - 2.0);
}

/// Two-sided exact permutation p-value: the fraction of permutations of ys
/// whose |rho| reaches the observed one. Feasible for n <= 8 (8! = 40320).
double exact_perm_p(const std::vector<double>& rx, std::vector<double> ry, double observed) {
    std::sort(ry.begin(), ry.end());
    uint64_t hits = 0, total = 0;
    do {
        ++total;
        if (std::fabs(pearson_r(rx, ry)) >= std::fabs(observed) - 1e-12) ++hits;
    } while (std::next_permutation(ry.begin(), ry.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

void check_pair(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw LengthMismatch("vectors differ: " + std::to_string(xs.size()) + " vs " +
                             std::to_string(ys.size()));
    }
    if (xs.size() < 3) throw TooShort("need at least 3 observations");
}

} // namespace

Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    check_pair(xs, ys);
    auto rx = midranks(xs);
    auto ry = midranks(ys);
    Correlation c;
    c.value = pearson_r(rx, ry);
    c.p_value = xs.size() <= 8 ? exact_perm_p(rx, ry, c.value) : t_approx_p(c.value, xs.size());
    return c;
}

Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    check_pair(xs, ys);
    Correlation c;
    c.value = pearson_r(xs, ys);
    c.p_value = t_approx_p(c.value, xs.size());
    return c;
}

std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q) {
    size_t m = p_values.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return p_values[a] < p_values[b]; });
    size_t cutoff = 0;  // number of rejected ranks
    for (size_t i = m; i >= 1; --i) {
        if (p_values[order[i - 1]] <= q * static_cast<double>(i) / static_cast<double>(m)) {
            cutoff = i;
            break;
        }
    }
    std::vector<bool> reject(m, false);
    for (size_t i = 0; i < cutoff; ++i) reject[order[i]] = true;
    return reject;
}

} // namespace securekl
