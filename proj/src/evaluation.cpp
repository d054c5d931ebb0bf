#include "securekl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "securekl/errors.hpp"
#include "securekl/rng.hpp"
#include "securekl/stats.hpp"

namespace securekl {

SgdHyperparams downstream_sgd_defaults() {
    SgdHyperparams hp;
    hp.learning_rate = 1.0;
    hp.momentum = 0.9;
    hp.dampening = 0.0;
    hp.weight_decay = 1e-6;
    hp.tolerance = 1e-6;
    hp.patience = 5;
    hp.max_epochs = 500;
    hp.batch_size = 1 << 20;  // one batch per epoch for any realistic site
    return hp;
}

DeltaEvalConfig::DeltaEvalConfig() : hp(downstream_sgd_defaults()) {}

namespace {

// Rows of `site` at `rows`, clipped/scaled to [0,1] with a bias column.
void append_scaled_rows(const SiteDataset& site, const std::vector<size_t>& rows, double lo,
                        double hi, std::vector<double>& X, std::vector<double>& y) {
    const double span = hi - lo;
    for (size_t r : rows) {
        for (size_t j = 0; j < site.d; ++j) {
            double v = std::clamp(site.x_at(r, j), lo, hi);
            X.push_back((v - lo) / span);
        }
        X.push_back(1.0);
        y.push_back(site.y[r]);
    }
}

std::vector<size_t> all_rows(size_t n) {
    std::vector<size_t> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

void check_both_classes(const std::vector<double>& y) {
    bool pos = false, neg = false;
    for (double v : y) (v > 0.5 ? pos : neg) = true;
    if (!pos || !neg) throw DegenerateLabels("training pool contains a single class");
}

} // namespace

PlainModel train_downstream(const std::vector<const SiteDataset*>& mixture,
                            const SgdHyperparams& hp, uint64_t seed, double clip_lo,
                            double clip_hi) {
    if (mixture.empty()) throw EmptySource("train_downstream: empty mixture");
    const size_t d = mixture.front()->d;
    std::vector<double> X, y;
    for (const auto* site : mixture) {
        if (site->d != d)
            throw DimensionMismatch("train_downstream: site '" + site->site_id + "' has d=" +
                                    std::to_string(site->d) + ", expected " + std::to_string(d));
        append_scaled_rows(*site, all_rows(site->n), clip_lo, clip_hi, X, y);
    }
    check_both_classes(y);
    return plain_logreg_train(X, y.size(), d + 1, y, hp, seed);
}

std::vector<double> downstream_scores(const PlainModel& model, const SiteDataset& site,
                                      const std::vector<size_t>& rows, double clip_lo,
                                      double clip_hi) {
    const double span = clip_hi - clip_lo;
    std::vector<double> out;
    out.reserve(rows.size());
    for (size_t r : rows) {
        double z = model.weights[site.d];  // bias
        for (size_t j = 0; j < site.d; ++j) {
            double v = std::clamp(site.x_at(r, j), clip_lo, clip_hi);
            z += model.weights[j] * (v - clip_lo) / span;
        }
        out.push_back(sigmoid_exact(z));
    }
    return out;
}

StrategyOutcome delta_eval(const SiteDataset& source,
                           const std::vector<const SiteDataset*>& selected,
                           const DeltaEvalConfig& cfg) {
    if (cfg.folds < 2) throw ConfigInvalid("delta_eval: folds must be at least 2");
    if (cfg.repeats < 1) throw ConfigInvalid("delta_eval: repeats must be at least 1");
    if (cfg.train_budget == 0 || cfg.test_budget == 0)
        throw ConfigInvalid("delta_eval: budgets must be positive");
    if (!(cfg.clip_hi > cfg.clip_lo)) throw ConfigInvalid("delta_eval: bad clip bounds");
    if (source.n < cfg.folds)
        throw TooFewSamples("delta_eval: source has " + std::to_string(source.n) +
                            " rows for " + std::to_string(cfg.folds) + " folds");
    for (const auto* t : selected)
        if (t->d != source.d)
            throw DimensionMismatch("delta_eval: site '" + t->site_id + "' has d=" +
                                    std::to_string(t->d) + ", expected " +
                                    std::to_string(source.d));

    double base_sum = 0.0, comb_sum = 0.0;
    for (size_t rep = 0; rep < cfg.repeats; ++rep) {
        const std::string rep_tag = "rep:" + std::to_string(rep);
        Rng rng(derive_seed(cfg.seed, rep_tag));
        auto perm = rng.permutation(source.n);

        // Each selected site contributes the same (seeded) row sample to
        // every fold of this repeat.
        std::vector<std::vector<size_t>> extra_rows;
        for (const auto* t : selected) {
            Rng tr(derive_seed(cfg.seed, rep_tag + ":tgt:" + t->site_id));
            extra_rows.push_back(
                tr.sample_without_replacement(t->n, std::min(t->n, cfg.train_budget)));
        }

        double base_rep = 0.0, comb_rep = 0.0;
        for (size_t fold = 0; fold < cfg.folds; ++fold) {
            const size_t lo = fold * source.n / cfg.folds;
            const size_t hi = (fold + 1) * source.n / cfg.folds;
            std::vector<size_t> test_rows(perm.begin() + lo, perm.begin() + hi);
            if (test_rows.size() > cfg.test_budget) test_rows.resize(cfg.test_budget);
            std::vector<size_t> train_rows;
            train_rows.insert(train_rows.end(), perm.begin(), perm.begin() + lo);
            train_rows.insert(train_rows.end(), perm.begin() + hi, perm.end());
            if (train_rows.size() > cfg.train_budget) train_rows.resize(cfg.train_budget);

            std::vector<double> Xb, yb;
            append_scaled_rows(source, train_rows, cfg.clip_lo, cfg.clip_hi, Xb, yb);
            std::vector<double> Xc = Xb, yc = yb;
            for (size_t s = 0; s < selected.size(); ++s)
                append_scaled_rows(*selected[s], extra_rows[s], cfg.clip_lo, cfg.clip_hi, Xc, yc);

            check_both_classes(yb);
            const uint64_t train_seed =
                derive_seed(cfg.seed, rep_tag + ":fold:" + std::to_string(fold));
            auto base_model = plain_logreg_train(Xb, yb.size(), source.d + 1, yb, cfg.hp, train_seed);
            auto comb_model = plain_logreg_train(Xc, yc.size(), source.d + 1, yc, cfg.hp, train_seed);

            auto base_scores = downstream_scores(base_model, source, test_rows, cfg.clip_lo, cfg.clip_hi);
            auto comb_scores = downstream_scores(comb_model, source, test_rows, cfg.clip_lo, cfg.clip_hi);
            std::vector<int> labels;
            labels.reserve(test_rows.size());
            for (size_t r : test_rows) labels.push_back(source.y[r] > 0.5 ? 1 : 0);
            base_rep += auc_score(base_scores, labels);
            comb_rep += auc_score(comb_scores, labels);
        }
        base_sum += base_rep / double(cfg.folds);  // folds first,
        comb_sum += comb_rep / double(cfg.folds);
    }

    StrategyOutcome out;
    out.source_id = source.site_id;
    for (const auto* t : selected) out.selected.push_back(t->site_id);
    out.auc_baseline = base_sum / double(cfg.repeats);  // then repeats
    out.auc_combined = comb_sum / double(cfg.repeats);
    out.delta = out.auc_combined - out.auc_baseline;
    out.folds = cfg.folds;
    out.repeats = cfg.repeats;
    out.seed = cfg.seed;
    return out;
}

ConsistencyReport consistency_report(const std::vector<DivergenceScore>& a,
                                     const std::vector<DivergenceScore>& b, double q) {
    std::map<std::string, std::map<std::string, double>> ma, mb;
    for (const auto& s : a) ma[s.source_id][s.target_id] = s.value;
    for (const auto& s : b) mb[s.source_id][s.target_id] = s.value;
    if (ma.empty()) throw MissingPairs("consistency_report: no scores in the first set");
    for (const auto& [src, targets] : ma) {
        auto it = mb.find(src);
        if (it == mb.end())
            throw MissingPairs("consistency_report: source '" + src + "' missing from second set");
        for (const auto& [tgt, _] : targets)
            if (!it->second.count(tgt))
                throw MissingPairs("consistency_report: pair '" + src + "' -> '" + tgt +
                                   "' missing from second set");
    }
    for (const auto& [src, targets] : mb) {
        auto it = ma.find(src);
        if (it == ma.end())
            throw MissingPairs("consistency_report: source '" + src + "' missing from first set");
        for (const auto& [tgt, _] : targets)
            if (!it->second.count(tgt))
                throw MissingPairs("consistency_report: pair '" + src + "' -> '" + tgt +
                                   "' missing from first set");
    }

    ConsistencyReport rep;
    rep.q = q;
    std::vector<double> ps;
    for (const auto& [src, targets] : ma) {  // std::map: sorted by source id
        std::vector<double> xs, ys;
        for (const auto& [tgt, v] : targets) {
            xs.push_back(v);
            ys.push_back(mb[src][tgt]);
        }
        auto c = spearman(xs, ys);
        rep.per_source.push_back({src, c.value, c.p_value, false});
        ps.push_back(c.p_value);
    }
    auto flags = bh_fdr(ps, q);
    double sum = 0.0;
    rep.min_rho = rep.per_source.front().rho;
    rep.max_rho = rep.per_source.front().rho;
    for (size_t i = 0; i < rep.per_source.size(); ++i) {
        rep.per_source[i].significant = flags[i];
        sum += rep.per_source[i].rho;
        rep.min_rho = std::min(rep.min_rho, rep.per_source[i].rho);
        rep.max_rho = std::max(rep.max_rho, rep.per_source[i].rho);
    }
    rep.mean_rho = sum / double(rep.per_source.size());
    return rep;
}

// --- emission ---

std::string outcomes_to_json(const std::vector<StrategyOutcome>& outcomes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& o : outcomes) {
        nlohmann::json j;
        j["source"] = o.source_id;
        j["strategy"] = strategy_name(o.strategy.kind);
        j["n"] = o.strategy.n;
        j["attribute"] = o.strategy.attribute;
        j["k"] = o.strategy.k;
        j["strategy_seed"] = o.strategy.seed;
        j["selected"] = o.selected;
        j["auc_baseline"] = o.auc_baseline;
        j["auc_combined"] = o.auc_combined;
        j["delta"] = o.delta;
        j["folds"] = o.folds;
        j["repeats"] = o.repeats;
        j["seed"] = o.seed;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::vector<StrategyOutcome> outcomes_from_json(const std::string& text) {
    std::vector<StrategyOutcome> out;
    try {
        nlohmann::json arr = nlohmann::json::parse(text);
        for (const auto& j : arr) {
            StrategyOutcome o;
            o.source_id = j.at("source").get<std::string>();
            o.strategy.kind = strategy_from_name(j.at("strategy").get<std::string>());
            o.strategy.n = j.at("n").get<size_t>();
            o.strategy.attribute = j.at("attribute").get<std::string>();
            o.strategy.k = j.at("k").get<size_t>();
            o.strategy.seed = j.at("strategy_seed").get<uint64_t>();
            o.selected = j.at("selected").get<std::vector<std::string>>();
            o.auc_baseline = j.at("auc_baseline").get<double>();
            o.auc_combined = j.at("auc_combined").get<double>();
            o.delta = j.at("delta").get<double>();
            o.folds = j.at("folds").get<size_t>();
            o.repeats = j.at("repeats").get<size_t>();
            o.seed = j.at("seed").get<uint64_t>();
            out.push_back(o);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("outcome JSON: ") + e.what());
    }
    return out;
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
    std::string s;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) s += '|';
        s += ids[i];
    }
    return s;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string outcomes_to_csv(const std::vector<StrategyOutcome>& outcomes) {
    std::string s = "source,strategy,n,k,strategy_seed,selected,auc_baseline,auc_combined,delta,"
                    "folds,repeats,seed\n";
    for (const auto& o : outcomes) {
        s += o.source_id;
        s += ',';
        s += strategy_name(o.strategy.kind);
        s += ',' + std::to_string(o.strategy.n) + ',' + std::to_string(o.strategy.k) + ',' +
             std::to_string(o.strategy.seed) + ',' + join_ids(o.selected) + ',' +
             fmt(o.auc_baseline) + ',' + fmt(o.auc_combined) + ',' + fmt(o.delta) + ',' +
             std::to_string(o.folds) + ',' + std::to_string(o.repeats) + ',' +
             std::to_string(o.seed) + '\n';
    }
    return s;
}

std::string outcomes_summary_csv(const std::vector<StrategyOutcome>& outcomes) {
    // Keyed by (strategy, n); order deterministic via std::map.
    std::map<std::pair<std::string, size_t>, std::vector<double>> cells;
    for (const auto& o : outcomes)
        cells[{strategy_name(o.strategy.kind), o.strategy.n}].push_back(o.delta);
    std::string s = "strategy,n,mean_delta,std_delta,count\n";
    for (const auto& [key, deltas] : cells) {
        double mean = 0.0;
        for (double d : deltas) mean += d;
        mean /= double(deltas.size());
        double var = 0.0;
        for (double d : deltas) var += (d - mean) * (d - mean);
        double sd = deltas.size() > 1 ? std::sqrt(var / double(deltas.size() - 1)) : 0.0;
        s += key.first + ',' + std::to_string(key.second) + ',' + fmt(mean) + ',' + fmt(sd) + ',' +
             std::to_string(deltas.size()) + '\n';
    }
    return s;
}

std::string consistency_to_json(const ConsistencyReport& rep) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.per_source) {
        nlohmann::json row;
        row["source"] = r.source_id;
        row["rho"] = r.rho;
        row["p_value"] = r.p_value;
        row["significant"] = r.significant;
        rows.push_back(row);
    }
    j["per_source"] = rows;
    j["mean_rho"] = rep.mean_rho;
    j["min_rho"] = rep.min_rho;
    j["max_rho"] = rep.max_rho;
    j["q"] = rep.q;
    return j.dump(2) + "\n";
}

std::string consistency_to_csv(const ConsistencyReport& rep) {
    std::string s = "source,rho,p_value,significant\n";
    for (const auto& r : rep.per_source)
        s += r.source_id + ',' + fmt(r.rho) + ',' + fmt(r.p_value) + ',' +
             (r.significant ? "1" : "0") + '\n';
    return s;
}

} // namespace securekl
