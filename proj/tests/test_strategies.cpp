#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "securekl/dataset.hpp"
#include "securekl/errors.hpp"
#include "securekl/rng.hpp"
#include "securekl/secure_ml.hpp"
#include "securekl/strategies.hpp"

using namespace securekl;

namespace {

// Gaussian site with a linear teacher label and a biased binary attribute.
SiteDataset demo_site(const std::string& id, size_t n, size_t d, double mu, uint64_t seed,
                      double attr_bias = 0.5) {
    SiteDataset s;
    s.site_id = id;
    s.n = n;
    s.d = d;
    s.X.resize(n * d);
    s.y.resize(n);
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (size_t j = 0; j < d; ++j) {
            double v = mu + rng.normal();
            s.X[i * d + j] = v;
            z += (j % 2 == 0 ? 1.0 : -1.0) * v;
        }
        s.y[i] = z > 0.0 ? 1.0 : 0.0;
        s.demo_rows["gender"].push_back(rng.uniform() < attr_bias ? 1 : 0);
    }
    refresh_demographics(s);
    return s;
}

SiteDataset hist_only(const std::string& id, std::map<std::string, std::vector<double>> h) {
    SiteDataset s;
    s.site_id = id;
    s.demographics = std::move(h);
    return s;
}

} // namespace

TEST_SUITE_BEGIN("strategies");

TEST_CASE("strategy names, parsing and leakage tags") {
    for (StrategyKind k : {StrategyKind::blind, StrategyKind::demographic, StrategyKind::subset,
                           StrategyKind::private_score})
        CHECK(strategy_from_name(strategy_name(k)) == k);
    CHECK(std::string(leakage_tag(StrategyKind::blind)) == "zero");
    CHECK(std::string(leakage_tag(StrategyKind::private_score)) == "minimal");
    CHECK(std::string(leakage_tag(StrategyKind::demographic)) == "moderate");
    CHECK(std::string(leakage_tag(StrategyKind::subset)) == "high");
    CHECK_THROWS_AS(strategy_from_name("psychic"), ConfigInvalid);
}

TEST_CASE("blind selection is seeded, uniform and order-independent") {
    std::vector<std::string> ids = {"s4", "s1", "s3", "s0", "s2"};
    StrategySpec spec;
    spec.kind = StrategyKind::blind;
    spec.n = 2;
    spec.seed = 77;

    auto a = select_blind(spec, ids);
    auto b = select_blind(spec, ids);
    CHECK(a == b);  // same seed, same pick
    REQUIRE(a.size() == 2);
    CHECK(a[0] != a[1]);

    // The draw depends on the candidate set, not the order it arrives in.
    std::vector<std::string> shuffled = {"s0", "s2", "s4", "s3", "s1"};
    CHECK(select_blind(spec, shuffled) == a);

    spec.seed = 78;
    CHECK(select_blind(spec, ids) != a);  // seeds matter

    spec.n = 6;
    CHECK_THROWS_AS(select_blind(spec, ids), NotEnoughCandidates);
    spec.n = 0;
    CHECK_THROWS_AS(select_blind(spec, ids), ConfigInvalid);

    // 10^4 single picks from 5 candidates: each within 3 sigma of 2000.
    std::map<std::string, int> counts;
    StrategySpec one;
    one.kind = StrategyKind::blind;
    one.n = 1;
    for (uint64_t s = 0; s < 10000; ++s) {
        one.seed = s;
        counts[select_blind(one, ids)[0]]++;
    }
    CHECK(counts.size() == 5);
    const double sigma = std::sqrt(10000.0 * 0.2 * 0.8);  // 40
    for (const auto& [id, c] : counts) {
        INFO("candidate ", id, " picked ", c, " times");
        CHECK(std::abs(c - 2000.0) <= 3.0 * sigma);
    }
}

TEST_CASE("demographic distance against hand-computed values") {
    auto a = hist_only("a", {{"gender", {0.5, 0.5}}});
    auto b = hist_only("b", {{"gender", {0.4, 0.6}}});
    auto c = hist_only("c", {{"gender", {1.0, 0.0}}});
    auto d = hist_only("d", {{"gender", {0.0, 1.0}}});

    CHECK(demographic_distance(a, a, "gender") == 0.0);
    CHECK(std::abs(demographic_distance(a, b, "gender") - 0.14142135623730953) <= 1e-12);
    CHECK(std::abs(demographic_distance(c, d, "gender") - std::sqrt(2.0)) <= 1e-12);
    // Symmetric.
    CHECK(demographic_distance(a, b, "gender") == demographic_distance(b, a, "gender"));

    CHECK_THROWS_AS(demographic_distance(a, b, "age"), MissingAttribute);
    auto e = hist_only("e", {{"gender", {0.3, 0.3, 0.4}}});
    CHECK_THROWS_AS(demographic_distance(a, e, "gender"), CategoryMismatch);
}

TEST_CASE("score-based selection ranks, tie-breaks and validates") {
    std::vector<RankedCandidate> two = {{"site_a", 0.3}, {"site_b", 0.1}};
    CHECK(select_by_score(two, 1) == std::vector<std::string>{"site_b"});
    CHECK(select_by_score(two, 2) == std::vector<std::string>{"site_b", "site_a"});

    std::vector<RankedCandidate> tie = {{"site_b", 0.2}, {"site_a", 0.2}};
    CHECK(select_by_score(tie, 1) == std::vector<std::string>{"site_a"});  // lexicographic

    std::vector<RankedCandidate> dup = {{"site_a", 0.1}, {"site_a", 0.2}};
    CHECK_THROWS_AS(select_by_score(dup, 1), IncompleteScores);
    CHECK_THROWS_AS(select_by_score(two, 3), IncompleteScores);
    std::vector<RankedCandidate> bad = {{"site_a", std::nan("")}};
    CHECK_THROWS_AS(select_by_score(bad, 1), NonFinite);

    SUBCASE("argmin is invariant under positive scaling") {
        Rng rng(5);
        std::vector<RankedCandidate> r;
        for (int i = 0; i < 9; ++i) r.push_back({"s" + std::to_string(i), rng.uniform()});
        auto base = select_by_score(r, 3);
        for (double c : {0.25, 3.7, 1e6}) {
            std::vector<RankedCandidate> scaled = r;
            for (auto& x : scaled) x.value *= c;
            CHECK(select_by_score(scaled, 3) == base);
        }
    }

    SUBCASE("greedy prefix: top-n is a prefix of top-(n+1)") {
        Rng rng(9);
        std::vector<RankedCandidate> r;
        for (int i = 0; i < 8; ++i) r.push_back({"s" + std::to_string(i), rng.uniform()});
        auto prev = select_by_score(r, 1);
        for (size_t n = 2; n <= r.size(); ++n) {
            auto cur = select_by_score(r, n);
            CHECK(std::equal(prev.begin(), prev.end(), cur.begin()));
            prev = cur;
        }
    }

    SUBCASE("divergence-score overload matches the plain form") {
        std::vector<DivergenceScore> ds(2);
        ds[0].target_id = "site_a";
        ds[0].value = 0.3;
        ds[1].target_id = "site_b";
        ds[1].value = 0.1;
        CHECK(select_by_score(ds, 2) == std::vector<std::string>{"site_b", "site_a"});
    }
}

TEST_CASE("blind and demographic strategy runs") {
    auto src = demo_site("src", 60, 4, 0.0, 11, 0.50);
    std::vector<SiteDataset> cands;
    cands.push_back(demo_site("c_far", 60, 4, 0.0, 12, 0.95));
    cands.push_back(demo_site("c_near", 60, 4, 0.0, 13, 0.52));
    cands.push_back(demo_site("c_mid", 60, 4, 0.0, 14, 0.75));
    cands.push_back(demo_site("src", 60, 4, 0.0, 15, 0.5));  // self: must be skipped

    auto plain_hp = plain_sgd_defaults();
    auto secure_hp = secure_sgd_defaults();
    ScoreOptions opt;

    SUBCASE("blind picks n ids uniformly and reveals nothing") {
        StrategySpec spec;
        spec.kind = StrategyKind::blind;
        spec.n = 2;
        spec.seed = 3;
        auto rec = run_strategy(spec, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec.source_id == "src");
        CHECK(rec.selected.size() == 2);
        CHECK(rec.ranking.empty());
        CHECK(rec.scores.empty());
        CHECK(rec.leakage == "zero");
        for (const auto& id : rec.selected) CHECK(id != "src");
        auto again = run_strategy(spec, src, cands, plain_hp, secure_hp, opt);
        CHECK(again.selected == rec.selected);
    }

    SUBCASE("demographic ranks by histogram distance") {
        StrategySpec spec;
        spec.kind = StrategyKind::demographic;
        spec.n = 1;
        spec.attribute = "gender";
        auto rec = run_strategy(spec, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec.selected == std::vector<std::string>{"c_near"});
        CHECK(rec.leakage == "moderate");
        REQUIRE(rec.ranking.size() == 3);  // self excluded
        for (const auto& r : rec.ranking) {
            auto it = std::find_if(cands.begin(), cands.end(), [&](const SiteDataset& c) {
                return c.site_id == r.target_id;
            });
            REQUIRE(it != cands.end());
            CHECK(r.value == demographic_distance(src, *it, "gender"));
        }
        CHECK(rec.scores.empty());  // no model trained, no KL record
    }

    SUBCASE("too many partners requested") {
        StrategySpec spec;
        spec.kind = StrategyKind::blind;
        spec.n = 4;  // only 3 non-self candidates
        CHECK_THROWS_AS(run_strategy(spec, src, cands, plain_hp, secure_hp, opt),
                        NotEnoughCandidates);
    }
}

TEST_CASE("subset and private strategies on a planted partner") {
    // One candidate shares the source distribution, one sits 2 sigma away.
    // At k = full size the row-sharing strategy must reproduce the
    // plaintext full-sample ranking exactly; the secure strategy scores
    // full data always and must put the twin first.
    const size_t n = 240, d = 6;
    auto src = demo_site("src", n, d, 0.0, 21);
    std::vector<SiteDataset> cands;
    cands.push_back(demo_site("twin", n, d, 0.0, 22));
    cands.push_back(demo_site("far", n, d, 2.0, 23));

    auto plain_hp = plain_sgd_defaults();
    auto secure_hp = secure_sgd_defaults();
    ScoreOptions opt;

    SUBCASE("default and explicit sample sizes are respected") {
        StrategySpec sub;
        sub.kind = StrategyKind::subset;
        sub.n = 1;
        sub.seed = 40;
        auto rec_sub = run_strategy(sub, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec_sub.leakage == "high");
        // Default sample is 1% of the candidate rows, floored at one row.
        CHECK(rec_sub.k_used == std::max<size_t>(1, n / 100));
        for (const auto& s : rec_sub.scores) CHECK(s.k_used == rec_sub.k_used);
        REQUIRE(rec_sub.ranking.size() == 2);
        CHECK(rec_sub.selected.size() == 1);

        sub.k = 50;
        auto rec_sub50 = run_strategy(sub, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec_sub50.k_used == 50);

        // Deterministic replay, values included.
        auto again = run_strategy(sub, src, cands, plain_hp, secure_hp, opt);
        CHECK(again.selected == rec_sub50.selected);
        for (size_t i = 0; i < again.ranking.size(); ++i)
            CHECK(again.ranking[i].value == rec_sub50.ranking[i].value);
    }

    SUBCASE("full-size sample reproduces the plaintext full-sample ranking") {
        StrategySpec sub;
        sub.kind = StrategyKind::subset;
        sub.n = 1;
        sub.seed = 40;
        sub.k = n;  // every row shared: no subsampling left
        auto rec = run_strategy(sub, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec.k_used == n);
        CHECK(rec.selected == std::vector<std::string>{"twin"});
        for (const auto& r : rec.ranking) {
            ScoreOptions o = opt;
            o.seed = derive_seed(sub.seed, "pair:src->" + r.target_id);
            const SiteDataset& cand = r.target_id == "twin" ? cands[0] : cands[1];
            auto direct = kl_xy_plain(src, cand, plain_hp, o);
            CHECK(r.value == direct.value);
        }
    }

    SUBCASE("secure strategy scores full data and finds the twin") {
        StrategySpec priv;
        priv.kind = StrategyKind::private_score;
        priv.n = 1;
        priv.seed = 40;
        auto rec_priv = run_strategy(priv, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec_priv.selected == std::vector<std::string>{"twin"});
        CHECK(rec_priv.leakage == "minimal");
        REQUIRE(rec_priv.scores.size() == 2);
        for (const auto& s : rec_priv.scores) {
            CHECK(s.k_used == n);  // full data, no row sharing
            CHECK(s.method == ScoreMethod::secure_kl_xy);
            CHECK(s.value >= 0.0);
            CHECK(s.value <= 1.0);
        }

        // Secure ranking matches the plaintext full-sample ranking order.
        StrategySpec sub = priv;
        sub.kind = StrategyKind::subset;
        sub.k = n;
        auto rec_sub = run_strategy(sub, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec_sub.selected == rec_priv.selected);

        // Byte-stable replay of the secure run.
        auto rec_priv2 = run_strategy(priv, src, cands, plain_hp, secure_hp, opt);
        CHECK(rec_priv2.selected == rec_priv.selected);
        REQUIRE(rec_priv2.ranking.size() == rec_priv.ranking.size());
        for (size_t i = 0; i < rec_priv.ranking.size(); ++i)
            CHECK(rec_priv2.ranking[i].value == rec_priv.ranking[i].value);
    }
}

TEST_SUITE_END();
