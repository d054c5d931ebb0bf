#include "securekl/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "securekl/errors.hpp"
#include "securekl/rng.hpp"

namespace securekl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd site_matrix(const SiteDataset& s) {
    MatrixXd m(s.n, s.d);
    for (size_t i = 0; i < s.n; ++i)
        for (size_t j = 0; j < s.d; ++j) m(i, j) = s.x_at(i, j);
    return m;
}

/// Squared distances between every eval row and every ref row.
MatrixXd sq_dists(const MatrixXd& eval, const MatrixXd& ref) {
    VectorXd en = eval.rowwise().squaredNorm();
    VectorXd rn = ref.rowwise().squaredNorm();
    MatrixXd d = (-2.0 * eval * ref.transpose()).rowwise() + rn.transpose();
    d.colwise() += en;
    return d.cwiseMax(0.0);  // clamp the tiny negatives cancellation produces
}

/// Row-wise log sum exp of -D / (2 h^2); never -inf for non-empty rows.
VectorXd lse_rows(const MatrixXd& d, double h) {
    const double inv = -0.5 / (h * h);
    VectorXd out(d.rows());
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        double top = d.row(i).minCoeff() * inv;  // largest exponent
        double acc = 0.0;
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            acc += std::exp(d(i, j) * inv - top);
        out(i) = top + std::log(acc);
    }
    return out;
}

/// Mean held-out log density at eval points of a KDE on ref points.
VectorXd log_density(const MatrixXd& eval, const MatrixXd& ref, double h) {
    const double k = double(eval.cols());
    const double norm = std::log(double(ref.rows())) + 0.5 * k * std::log(2.0 * M_PI) +
                        k * std::log(h);
    return lse_rows(sq_dists(eval, ref), h).array() - norm;
}

/// Log density of each point under the KDE of its own sample, leaving the
/// point itself out. Including the self kernel (exp(0)) inflates the
/// density noticeably at these sample sizes, which would bias the ratio up.
VectorXd log_density_loo(const MatrixXd& pts, double h) {
    MatrixXd d = sq_dists(pts, pts);
    d.diagonal().setConstant(1e300);  // self term underflows to zero
    const double k = double(pts.cols());
    const double norm = std::log(double(pts.rows() - 1)) +
                        0.5 * k * std::log(2.0 * M_PI) + k * std::log(h);
    return lse_rows(d, h).array() - norm;
}

/// Pick the grid bandwidth maximising k-fold held-out log likelihood.
double cv_bandwidth(const MatrixXd& pts, const std::vector<double>& grid, size_t folds,
                    uint64_t seed) {
    const size_t m = size_t(pts.rows());
    folds = std::min(folds, m);
    Rng rng(seed);
    auto perm = rng.permutation(m);

    std::vector<double> total(grid.size(), 0.0);
    size_t start = 0;
    for (size_t f = 0; f < folds; ++f) {
        size_t stop = start + m / folds + (f < m % folds ? 1 : 0);
        MatrixXd held(stop - start, pts.cols());
        MatrixXd train(m - (stop - start), pts.cols());
        size_t hi = 0, ti = 0;
        for (size_t r = 0; r < m; ++r) {
            bool in_fold = r >= start && r < stop;
            (in_fold ? held : train).row(Eigen::Index(in_fold ? hi++ : ti++)) =
                pts.row(Eigen::Index(perm[r]));
        }
        MatrixXd d = sq_dists(held, train);
        const double k = double(pts.cols());
        for (size_t g = 0; g < grid.size(); ++g) {
            double h = grid[g];
            double norm = std::log(double(train.rows())) +
                          0.5 * k * std::log(2.0 * M_PI) + k * std::log(h);
            total[g] += lse_rows(d, h).sum() - double(held.rows()) * norm;
        }
        start = stop;
    }
    size_t best = 0;
    for (size_t g = 1; g < grid.size(); ++g)
        if (total[g] > total[best]) best = g;
    return grid[best];
}

std::vector<double> default_grid() {
    std::vector<double> g(10);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = 0.05 * std::pow(1.0 / 0.05, double(i) / double(g.size() - 1));
    return g;
}

} // namespace

DivergenceScore kde_kl(const SiteDataset& src, const SiteDataset& tgt,
                       const KdeOptions& opt) {
    if (src.d != tgt.d)
        throw DimensionMismatch("kde_kl: feature dimensions differ (" +
                                std::to_string(src.d) + " vs " + std::to_string(tgt.d) + ")");
    if (src.n < 50 || tgt.n < 50)
        throw TooFewSamples("kde_kl needs at least 50 rows per side, got " +
                            std::to_string(src.n) + " and " + std::to_string(tgt.n));
    if (opt.n_components < 1) throw ConfigInvalid("n_components must be >= 1");
    if (opt.cv_folds < 2) throw ConfigInvalid("cv_folds must be >= 2");
    std::vector<double> grid = opt.bandwidth_grid.empty() ? default_grid() : opt.bandwidth_grid;
    for (double h : grid)
        if (!(h > 0.0) || !std::isfinite(h))
            throw ConfigInvalid("bandwidths must be finite and > 0");

    MatrixXd xo = site_matrix(src), xi = site_matrix(tgt);
    MatrixXd pool(xo.rows() + xi.rows(), xo.cols());
    pool << xo, xi;

    // z-normalise on the pool; the same affine map on both sides leaves
    // the true KL unchanged
    VectorXd mean = pool.colwise().mean();
    pool.rowwise() -= mean.transpose();
    VectorXd sd = (pool.array().square().colwise().sum() / double(pool.rows() - 1))
                      .sqrt()
                      .matrix();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (sd(j) < 1e-12) sd(j) = 1.0;  // constant column: leave centred zeros
    pool.array().rowwise() /= sd.transpose().array();

    MatrixXd cov = (pool.transpose() * pool) / double(pool.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    if (es.info() != Eigen::Success) {
        cov.diagonal().array() += 1e-6;
        es.compute(cov);
        if (es.info() != Eigen::Success)
            throw SingularCovariance("pooled covariance eigendecomposition failed");
    }

    // eigenvalues come out ascending; take the top components
    const size_t k = std::min(opt.n_components, size_t(pool.cols()));
    MatrixXd proj(pool.cols(), k);
    for (size_t c = 0; c < k; ++c)
        proj.col(Eigen::Index(c)) = es.eigenvectors().col(pool.cols() - 1 - Eigen::Index(c));

    xo.rowwise() -= mean.transpose();
    xo.array().rowwise() /= sd.transpose().array();
    xi.rowwise() -= mean.transpose();
    xi.array().rowwise() /= sd.transpose().array();
    MatrixXd po = xo * proj, pi = xi * proj;

    // One derived seed for both sides: identical inputs then get identical
    // folds, hence identical bandwidths and an exactly zero estimate.
    uint64_t cv_seed = derive_seed(opt.seed, "kde-cv");
    double ho = cv_bandwidth(po, grid, opt.cv_folds, cv_seed);
    double hi = cv_bandwidth(pi, grid, opt.cv_folds, cv_seed);

    VectorXd diff = log_density_loo(po, ho) - log_density(po, pi, hi);
    double value = std::max(diff.mean(), -opt.mc_slack);

    DivergenceScore score;
    score.source_id = src.site_id;
    score.target_id = tgt.site_id;
    score.method = ScoreMethod::kde_kl;
    score.value = value;
    score.k_used = tgt.n;
    score.seed = opt.seed;
    return score;
}

} // namespace securekl
