#include <doctest.h>

#include <cmath>

#include "securekl/errors.hpp"
#include "securekl/kde.hpp"
#include "securekl/rng.hpp"

using namespace securekl;

namespace {

/// n points in `dim`-D: first coordinate N(mu, sigma^2), rest N(0,1).
SiteDataset gaussian_site(const std::string& id, size_t n, size_t dim, double mu,
                          double sigma, uint64_t seed) {
    SiteDataset s;
    s.site_id = id;
    s.n = n;
    s.d = dim;
    s.X.resize(n * dim);
    s.y.assign(n, 0.0);
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        s.X[i * dim] = mu + sigma * rng.normal();
        for (size_t j = 1; j < dim; ++j) s.X[i * dim + j] = rng.normal();
    }
    return s;
}

/// KL( N(mu0, s0^2) || N(mu1, s1^2) ), the closed form the estimates chase.
double gaussian_kl(double mu0, double s0, double mu1, double s1) {
    double v0 = s0 * s0, v1 = s1 * s1;
    return 0.5 * (v0 / v1 + (mu1 - mu0) * (mu1 - mu0) / v1 - 1.0 + std::log(v1 / v0));
}

} // namespace

TEST_SUITE("kde") {

TEST_CASE("identical datasets score zero") {
    auto a = gaussian_site("a", 400, 3, 0.0, 1.0, 11);
    auto b = a;
    b.site_id = "b";
    auto s = kde_kl(a, b);
    CHECK(std::abs(s.value) <= 0.05);  // identical sets: floored LOO artefact at worst
    CHECK(s.source_id == "a");
    CHECK(s.target_id == "b");
    CHECK(s.method == ScoreMethod::kde_kl);
    CHECK(s.k_used == 400);
}

TEST_CASE("mean-shifted gaussian matches the closed form") {
    double truth = gaussian_kl(0.0, 1.0, 1.0, 1.0);  // = 0.5
    auto src = gaussian_site("o", 2000, 3, 0.0, 1.0, 21);
    auto tgt = gaussian_site("i", 2000, 3, 1.0, 1.0, 22);
    auto s = kde_kl(src, tgt);
    MESSAGE("shift KL estimate = ", s.value, " (truth ", truth, ")");
    CHECK(std::abs(s.value - truth) <= 0.1);
}

TEST_CASE("variance-inflated gaussian matches the closed form") {
    double truth = gaussian_kl(0.0, 1.0, 0.0, 2.0);  // ~= 0.3182
    auto src = gaussian_site("o", 2000, 3, 0.0, 1.0, 31);
    auto tgt = gaussian_site("i", 2000, 3, 0.0, 2.0, 32);
    auto s = kde_kl(src, tgt);
    MESSAGE("variance KL estimate = ", s.value, " (truth ", truth, ")");
    CHECK(std::abs(s.value - truth) <= 0.1);
}

TEST_CASE("same-distribution pairs sit near zero and respect the floor") {
    for (uint64_t seed : {40, 41, 42}) {
        auto src = gaussian_site("o", 800, 3, 0.0, 1.0, seed);
        auto tgt = gaussian_site("i", 800, 3, 0.0, 1.0, seed + 100);
        auto s = kde_kl(src, tgt);
        CHECK(std::abs(s.value) <= 0.05);
        CHECK(s.value >= -0.05);  // the Monte-Carlo floor

        KdeOptions tight;
        tight.mc_slack = 0.0;
        CHECK(kde_kl(src, tgt, tight).value >= 0.0);
    }
}

TEST_CASE("common affine rescaling leaves the estimate alone") {
    auto src = gaussian_site("o", 600, 3, 0.0, 1.0, 51);
    auto tgt = gaussian_site("i", 600, 3, 1.0, 1.0, 52);
    double base = kde_kl(src, tgt).value;
    for (auto* site : {&src, &tgt})
        for (auto& x : site->X) x = 100.0 * x + 7.0;
    CHECK(std::abs(kde_kl(src, tgt).value - base) <= 1e-6);
}

TEST_CASE("deterministic given inputs and options") {
    auto src = gaussian_site("o", 300, 4, 0.5, 1.0, 61);
    auto tgt = gaussian_site("i", 300, 4, 0.0, 1.0, 62);
    auto a = kde_kl(src, tgt);
    auto b = kde_kl(src, tgt);
    CHECK(a.value == b.value);

    KdeOptions other;
    other.seed = 99;
    auto c = kde_kl(src, tgt, other);
    CHECK(c.seed == 99);  // folds may or may not move the bandwidth
}

TEST_CASE("low-dimensional inputs clamp the component count") {
    auto src = gaussian_site("o", 200, 2, 0.0, 1.0, 71);
    auto tgt = gaussian_site("i", 200, 2, 1.5, 1.0, 72);
    auto s = kde_kl(src, tgt);  // d=2 < 3 components requested
    CHECK(s.value > 0.3);
}

TEST_CASE("input validation") {
    auto ok = gaussian_site("o", 200, 3, 0.0, 1.0, 81);
    auto small = gaussian_site("i", 30, 3, 0.0, 1.0, 82);
    CHECK_THROWS_AS(kde_kl(ok, small), TooFewSamples);
    CHECK_THROWS_AS(kde_kl(small, ok), TooFewSamples);

    auto wide = gaussian_site("i", 200, 5, 0.0, 1.0, 83);
    CHECK_THROWS_AS(kde_kl(ok, wide), DimensionMismatch);

    KdeOptions bad;
    auto tgt = gaussian_site("i", 200, 3, 0.0, 1.0, 84);
    SUBCASE("empty-positive grid") {
        bad.bandwidth_grid = {0.5, 0.0};
        CHECK_THROWS_AS(kde_kl(ok, tgt, bad), ConfigInvalid);
    }
    SUBCASE("folds") {
        bad.cv_folds = 1;
        CHECK_THROWS_AS(kde_kl(ok, tgt, bad), ConfigInvalid);
    }
    SUBCASE("components") {
        bad.n_components = 0;
        CHECK_THROWS_AS(kde_kl(ok, tgt, bad), ConfigInvalid);
    }
}

} // TEST_SUITE
