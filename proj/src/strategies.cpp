#include "securekl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "securekl/errors.hpp"
#include "securekl/rng.hpp"

namespace securekl {

const char* strategy_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::blind: return "blind";
        case StrategyKind::demographic: return "demographic";
        case StrategyKind::subset: return "subset";
        case StrategyKind::private_score: return "private";
    }
    return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
    if (name == "blind") return StrategyKind::blind;
    if (name == "demographic") return StrategyKind::demographic;
    if (name == "subset") return StrategyKind::subset;
    if (name == "private") return StrategyKind::private_score;
    throw ConfigInvalid("unknown strategy '" + name +
                        "' (expected blind, demographic, subset or private)");
}

const char* leakage_tag(StrategyKind k) {
    switch (k) {
        case StrategyKind::blind: return "zero";          // nothing leaves the candidate
        case StrategyKind::demographic: return "moderate"; // aggregate histograms
        case StrategyKind::subset: return "high";          // raw rows
        case StrategyKind::private_score: return "minimal"; // one scalar per pair
    }
    return "?";
}

std::vector<std::string> select_blind(const StrategySpec& spec,
                                      const std::vector<std::string>& candidate_ids) {
    if (spec.n == 0) throw ConfigInvalid("select_blind: n must be at least 1");
    if (spec.n > candidate_ids.size())
        throw NotEnoughCandidates("select_blind: asked for " + std::to_string(spec.n) +
                                  " of " + std::to_string(candidate_ids.size()) + " candidates");
    // Sort first so the draw depends on the candidate *set*, not its order.
    std::vector<std::string> ids = candidate_ids;
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(spec.seed, "blind"));
    auto pick = rng.sample_without_replacement(ids.size(), spec.n);
    std::vector<std::string> out;
    out.reserve(spec.n);
    for (size_t i : pick) out.push_back(ids[i]);
    return out;
}

double demographic_distance(const SiteDataset& src, const SiteDataset& tgt,
                            const std::string& attribute) {
    auto it_s = src.demographics.find(attribute);
    if (it_s == src.demographics.end())
        throw MissingAttribute("site '" + src.site_id + "' has no attribute '" + attribute + "'");
    auto it_t = tgt.demographics.find(attribute);
    if (it_t == tgt.demographics.end())
        throw MissingAttribute("site '" + tgt.site_id + "' has no attribute '" + attribute + "'");
    const auto& hs = it_s->second;
    const auto& ht = it_t->second;
    if (hs.size() != ht.size())
        throw CategoryMismatch("attribute '" + attribute + "': " + std::to_string(hs.size()) +
                               " categories at '" + src.site_id + "' vs " +
                               std::to_string(ht.size()) + " at '" + tgt.site_id + "'");
    double sq = 0.0;
    for (size_t c = 0; c < hs.size(); ++c) {
        double diff = hs[c] - ht[c];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

std::vector<std::string> select_by_score(const std::vector<RankedCandidate>& ranking, size_t n) {
    std::set<std::string> seen;
    for (const auto& r : ranking) {
        if (!std::isfinite(r.value))
            throw NonFinite("select_by_score: non-finite score for '" + r.target_id + "'");
        if (!seen.insert(r.target_id).second)
            throw IncompleteScores("select_by_score: duplicate score for '" + r.target_id + "'");
    }
    if (n > ranking.size())
        throw IncompleteScores("select_by_score: need " + std::to_string(n) + " candidates, have " +
                               std::to_string(ranking.size()) + " scores");
    std::vector<RankedCandidate> ranked = ranking;
    std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.target_id < b.target_id;  // deterministic tie-break
    });
    std::vector<std::string> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(ranked[i].target_id);
    return out;
}

std::vector<std::string> select_by_score(const std::vector<DivergenceScore>& scores, size_t n) {
    std::vector<RankedCandidate> ranking;
    ranking.reserve(scores.size());
    for (const auto& s : scores) ranking.push_back({s.target_id, s.value});
    return select_by_score(ranking, n);
}

SelectionRecord run_strategy(const StrategySpec& spec, const SiteDataset& source,
                             const std::vector<SiteDataset>& candidates,
                             const SgdHyperparams& plain_hp, const SgdHyperparams& secure_hp,
                             const ScoreOptions& base_opt) {
    if (spec.n == 0) throw ConfigInvalid("run_strategy: n must be at least 1");
    std::vector<const SiteDataset*> pool;
    for (const auto& c : candidates)
        if (c.site_id != source.site_id) pool.push_back(&c);
    if (spec.n > pool.size())
        throw NotEnoughCandidates("run_strategy: asked for " + std::to_string(spec.n) + " of " +
                                  std::to_string(pool.size()) + " candidates");
    std::sort(pool.begin(), pool.end(),
              [](const SiteDataset* a, const SiteDataset* b) { return a->site_id < b->site_id; });

    SelectionRecord rec;
    rec.source_id = source.site_id;
    rec.spec = spec;
    rec.leakage = leakage_tag(spec.kind);

    if (spec.kind == StrategyKind::blind) {
        std::vector<std::string> ids;
        ids.reserve(pool.size());
        for (const auto* c : pool) ids.push_back(c->site_id);
        rec.selected = select_blind(spec, ids);
        return rec;
    }

    for (const auto* cand : pool) {
        if (spec.kind == StrategyKind::demographic) {
            rec.ranking.push_back(
                {cand->site_id, demographic_distance(source, *cand, spec.attribute)});
            continue;
        }
        ScoreOptions opt = base_opt;
        opt.seed = derive_seed(spec.seed, "pair:" + source.site_id + "->" + cand->site_id);
        DivergenceScore sc;
        if (spec.kind == StrategyKind::subset) {
            opt.k_target = spec.k > 0 ? spec.k : std::max<size_t>(1, cand->n / 100);
            sc = kl_xy_plain(source, *cand, plain_hp, opt);
            rec.k_used = std::max(rec.k_used, sc.k_used);
        } else {  // private_score: full data, secure session, score opens only
            sc = secure_score_inprocess(ScoreMethod::secure_kl_xy, source, *cand, secure_hp, opt);
        }
        rec.scores.push_back(sc);
        rec.ranking.push_back({sc.target_id, sc.value});
    }
    rec.selected = select_by_score(rec.ranking, spec.n);
    return rec;
}

} // namespace securekl
