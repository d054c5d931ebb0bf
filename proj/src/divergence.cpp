#include "securekl/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "securekl/errors.hpp"
#include "securekl/plain_ml.hpp"
#include "securekl/rng.hpp"
#include "securekl/secure_session.hpp"

namespace securekl {

namespace {

// Seed-derivation tags shared by the plain and secure paths: identical
// tags mean identical subsampling, row shuffles and batch orders, so the
// two paths differ only by fixed-point noise.
constexpr const char* kTagSubsample = "subsample";
constexpr const char* kTagMemberPerm = "member-perm";
constexpr const char* kTagSgd = "sgd";

size_t resolved_k(const ScoreOptions& opt, size_t n_tgt) {
    size_t k = std::min(opt.k_target, n_tgt);
    if (k == 0) throw EmptySource("no target rows selected");
    return k;
}

std::vector<size_t> target_row_choice(size_t n_tgt, size_t k, uint64_t seed) {
    if (k >= n_tgt) {
        std::vector<size_t> all(n_tgt);
        for (size_t i = 0; i < n_tgt; ++i) all[i] = i;
        return all;
    }
    Rng rng(derive_seed(seed, kTagSubsample));
    return rng.sample_without_replacement(n_tgt, k);
}

uint64_t run_fingerprint(const SgdHyperparams& hp, const ScoreOptions& opt) {
    double blob[10] = {hp.learning_rate, double(hp.patience), hp.tolerance,
                       hp.momentum,      hp.weight_decay,     hp.dampening,
                       double(hp.max_epochs), double(hp.batch_size),
                       opt.clip_lo,      opt.clip_hi};
    return fnv1a(blob, sizeof blob);
}

} // namespace

const char* method_name(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::kl_xy: return "KL_XY";
        case ScoreMethod::kl_x: return "KL_X";
        case ScoreMethod::secure_kl_xy: return "SecureKL_XY";
        case ScoreMethod::secure_kl_x: return "SecureKL_X";
        case ScoreMethod::kde_kl: return "KDE_KL";
    }
    throw ConfigInvalid("unknown score method enum value");
}

ScoreMethod method_from_name(const std::string& name) {
    for (ScoreMethod m : {ScoreMethod::kl_xy, ScoreMethod::kl_x, ScoreMethod::secure_kl_xy,
                          ScoreMethod::secure_kl_x, ScoreMethod::kde_kl})
        if (name == method_name(m)) return m;
    throw ConfigInvalid("unknown score method '" + name + "'");
}

std::vector<double> scale_features_unit(const std::vector<double>& X, double lo, double hi) {
    if (!(hi > lo)) throw ConfigInvalid("feature clip bounds must satisfy hi > lo");
    std::vector<double> out(X.size());
    const double span = hi - lo;
    for (size_t i = 0; i < X.size(); ++i)
        out[i] = (std::clamp(X[i], lo, hi) - lo) / span;
    return out;
}

MembershipDataset build_membership_dataset(const SiteDataset& src, const SiteDataset& tgt,
                                           bool use_labels, uint64_t seed) {
    if (src.d != tgt.d)
        throw DimensionMismatch("membership dataset: feature dimensions differ (" +
                                std::to_string(src.d) + " vs " + std::to_string(tgt.d) + ")");
    const size_t d = src.d, m = src.n + tgt.n;
    const size_t cols = d + (use_labels ? 1 : 0);

    // concatenate (source block first), then shuffle rows by the public seed
    std::vector<double> rows(m * cols);
    std::vector<double> flags(m);
    auto put = [&](size_t r, const SiteDataset& s, size_t i, double flag) {
        for (size_t j = 0; j < d; ++j) rows[r * cols + j] = s.x_at(i, j);
        if (use_labels) rows[r * cols + d] = s.y[i];
        flags[r] = flag;
    };
    for (size_t i = 0; i < src.n; ++i) put(i, src, i, 1.0);
    for (size_t i = 0; i < tgt.n; ++i) put(src.n + i, tgt, i, 0.0);

    Rng rng(derive_seed(seed, kTagMemberPerm));
    auto perm = rng.permutation(m);

    MembershipDataset out;
    out.m = m;
    out.cols = cols;
    out.X.resize(m * cols);
    out.I.resize(m);
    for (size_t r = 0; r < m; ++r) {
        std::copy_n(rows.begin() + long(perm[r] * cols), cols, out.X.begin() + long(r * cols));
        out.I[r] = flags[perm[r]];
    }
    return out;
}

// --- plaintext path ---

static DivergenceScore plain_classifier_score(const SiteDataset& src, const SiteDataset& tgt,
                                              const SgdHyperparams& hp, const ScoreOptions& opt,
                                              bool use_labels, ScoreMethod method) {
    if (src.d != tgt.d)
        throw DimensionMismatch("score: feature dimensions differ");
    if (src.n == 0) throw EmptySource("source site has no rows");
    validate_hyperparams(hp);
    const size_t k_used = resolved_k(opt, tgt.n);

    SiteDataset tsub;
    const SiteDataset* t = &tgt;
    if (k_used < tgt.n) {
        auto pick = target_row_choice(tgt.n, k_used, opt.seed);
        tsub.site_id = tgt.site_id;
        tsub.n = k_used;
        tsub.d = tgt.d;
        tsub.X.resize(k_used * tgt.d);
        tsub.y.resize(k_used);
        for (size_t r = 0; r < k_used; ++r) {
            std::copy_n(tgt.X.begin() + long(pick[r] * tgt.d), tgt.d,
                        tsub.X.begin() + long(r * tgt.d));
            tsub.y[r] = tgt.y[pick[r]];
        }
        t = &tsub;
    }

    SiteDataset s2 = src, t2 = *t;
    s2.X = scale_features_unit(s2.X, opt.clip_lo, opt.clip_hi);
    t2.X = scale_features_unit(t2.X, opt.clip_lo, opt.clip_hi);

    auto mem = build_membership_dataset(s2, t2, use_labels, opt.seed);
    const size_t C = mem.cols + 1;  // bias column for the trainer
    std::vector<double> Xb(mem.m * C);
    for (size_t r = 0; r < mem.m; ++r) {
        std::copy_n(mem.X.begin() + long(r * mem.cols), mem.cols, Xb.begin() + long(r * C));
        Xb[r * C + C - 1] = 1.0;
    }

    auto model = plain_logreg_train(Xb, mem.m, C, mem.I, hp, derive_seed(opt.seed, kTagSgd));

    std::vector<double> src_rows;
    src_rows.reserve(src.n * C);
    for (size_t r = 0; r < mem.m; ++r)
        if (mem.I[r] == 1.0)
            src_rows.insert(src_rows.end(), Xb.begin() + long(r * C),
                            Xb.begin() + long((r + 1) * C));
    double v = plain_mean_score(model, src_rows, src.n);

    DivergenceScore score;
    score.source_id = src.site_id;
    score.target_id = tgt.site_id;
    score.method = method;
    score.value = std::clamp(v, 0.0, 1.0);
    score.k_used = k_used;
    score.seed = opt.seed;
    return score;
}

DivergenceScore kl_xy_plain(const SiteDataset& src, const SiteDataset& tgt,
                            const SgdHyperparams& hp, const ScoreOptions& opt) {
    return plain_classifier_score(src, tgt, hp, opt, true, ScoreMethod::kl_xy);
}

DivergenceScore kl_x_plain(const SiteDataset& src, const SiteDataset& tgt,
                           const SgdHyperparams& hp, const ScoreOptions& opt) {
    return plain_classifier_score(src, tgt, hp, opt, false, ScoreMethod::kl_x);
}

// --- secure path ---

static DivergenceScore secure_classifier_score(PartySession& s, const SiteDataset& mine,
                                               const SecureScoreSpec& spec, bool use_labels,
                                               ScoreMethod method) {
    const ScoreOptions& opt = spec.opt;
    if (spec.n_src == 0) throw EmptySource("source site has no rows");
    validate_hyperparams(spec.hp);
    const size_t k_used = resolved_k(opt, spec.n_tgt);
    const int role = s.role();

    const size_t my_expected = role == 0 ? spec.n_src : spec.n_tgt;
    if (mine.n != my_expected || mine.d != spec.d)
        throw ShapeMismatch("local site does not match the public run spec");

    // Everything both sides must agree on before any rows move. A mismatch
    // aborts with SessionMismatch on both sides.
    s.handshake({0x534b4c6b6c786600ULL,  // engine magic
                 uint64_t(method), uint64_t(use_labels), spec.n_src, spec.n_tgt, k_used,
                 spec.d, opt.seed, uint64_t(opt.strict), run_fingerprint(spec.hp, opt)});

    const size_t C = spec.d + (use_labels ? 1 : 0) + 1;  // features [label] bias

    // my rows, scaled into [0,1], label folded in, bias appended
    std::vector<size_t> pick = role == 0
                                   ? target_row_choice(spec.n_src, spec.n_src, opt.seed)
                                   : target_row_choice(spec.n_tgt, k_used, opt.seed);
    auto scaled = scale_features_unit(mine.X, opt.clip_lo, opt.clip_hi);
    std::vector<double> block(pick.size() * C);
    for (size_t r = 0; r < pick.size(); ++r) {
        std::copy_n(scaled.begin() + long(pick[r] * spec.d), spec.d,
                    block.begin() + long(r * C));
        if (use_labels) block[r * C + spec.d] = mine.y[pick[r]];
        block[r * C + C - 1] = 1.0;
    }
    RingTensor enc = rt_encode(block, pick.size(), C);

    // source rows are tensor one, target rows tensor two, on both sides
    SharedTensor s_src, s_tgt;
    if (role == 0) {
        s_src = s.share_own(enc);
        s_tgt = s.recv_shared(k_used, C);
    } else {
        s_src = s.recv_shared(spec.n_src, C);
        s_tgt = s.share_own(enc);
    }

    // public row shuffle: same tag as the plaintext path, so both paths
    // train on identically ordered rows
    const size_t m = spec.n_src + k_used;
    Rng rng(derive_seed(opt.seed, kTagMemberPerm));
    auto perm = rng.permutation(m);

    SharedTensor x_full;
    x_full.share = RingTensor(m, C);
    std::vector<double> flags(m);
    std::vector<size_t> src_pos;
    for (size_t r = 0; r < m; ++r) {
        const bool from_src = perm[r] < spec.n_src;
        const RingTensor& part = from_src ? s_src.share : s_tgt.share;
        const size_t i = from_src ? perm[r] : perm[r] - spec.n_src;
        std::copy_n(part.data.begin() + long(i * C), C, x_full.share.data.begin() + long(r * C));
        flags[r] = from_src ? 1.0 : 0.0;
        if (from_src) src_pos.push_back(r);
    }

    // membership labels come from public row provenance
    SharedTensor labels = s.share_public(rt_encode(flags, m, 1));

    SecureTrainOptions train_opt;
    train_opt.shuffle_seed = derive_seed(opt.seed, kTagSgd);
    train_opt.strict = opt.strict;
    train_opt.known_positive_count = spec.n_src;
    SecureModel model = secure_logreg_train(s, x_full, labels, spec.hp, train_opt);

    double v = secure_mean_score(s, model, st_take_rows(x_full, src_pos));

    DivergenceScore score;
    score.source_id = spec.source_id;
    score.target_id = spec.target_id;
    score.method = method;
    score.value = v;  // raw: the caller applies the plausibility gate and clamp
    score.k_used = k_used;
    score.seed = opt.seed;
    return score;
}

DivergenceScore kl_xy_secure(PartySession& s, const SiteDataset& mine,
                             const SecureScoreSpec& spec) {
    return secure_classifier_score(s, mine, spec, true, ScoreMethod::secure_kl_xy);
}

DivergenceScore kl_x_secure(PartySession& s, const SiteDataset& mine,
                            const SecureScoreSpec& spec) {
    return secure_classifier_score(s, mine, spec, false, ScoreMethod::secure_kl_x);
}

DivergenceScore secure_score_inprocess(ScoreMethod method, const SiteDataset& src,
                                       const SiteDataset& tgt, const SgdHyperparams& hp,
                                       const ScoreOptions& opt, TraceRecorder* trace0_out,
                                       TraceRecorder* trace1_out) {
    if (method != ScoreMethod::secure_kl_xy && method != ScoreMethod::secure_kl_x)
        throw ConfigInvalid("secure_score_inprocess handles the secure methods only");

    SecureScoreSpec spec;
    spec.source_id = src.site_id;
    spec.target_id = tgt.site_id;
    spec.n_src = src.n;
    spec.n_tgt = tgt.n;
    spec.d = src.d;
    spec.hp = hp;

    // A truncation wrap is a ~2^-29 per-multiply event; across a whole
    // training run a HANDFUL of scores per million can come out corrupted.
    // Wraps are a deterministic function of the seed, so retrying with a
    // derived seed is itself reproducible.
    constexpr int kAttempts = 3;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        ScoreOptions o = opt;
        if (attempt > 0) o.seed = derive_seed(opt.seed, "retry:" + std::to_string(attempt));
        spec.opt = o;

        SessionParams params;
        params.seed = derive_seed(o.seed, "session");
        params.session_id = uint32_t(fnv1a(src.site_id + "|" + tgt.site_id, o.seed) | 1u);

        DivergenceScore out0, out1;
        auto score_one = [&spec, method](PartySession& ps, const SiteDataset& site) {
            return method == ScoreMethod::secure_kl_xy ? kl_xy_secure(ps, site, spec)
                                                       : kl_x_secure(ps, site, spec);
        };
        bool record = trace0_out != nullptr || trace1_out != nullptr;
        try {
            run_two_party_inprocess(
                params, [&](PartySession& ps) { out0 = score_one(ps, src); },
                [&](PartySession& ps) { out1 = score_one(ps, tgt); }, record, trace0_out,
                trace1_out);
        } catch (const NonFinite&) {
            continue;  // a wrap surfaced mid-run (e.g. an opened epoch loss)
        }
        if (out0.value != out1.value)
            throw ProtocolDesync("parties opened different final scores");

        if (out0.value >= -0.05 && out0.value <= 1.05) {
            out0.value = std::clamp(out0.value, 0.0, 1.0);
            out0.seed = opt.seed;  // callers replay from the base seed
            return out0;
        }
    }
    throw NonFinite("secure score stayed implausible across retries");
}

// --- JSON records ---

std::string scores_to_json(const std::vector<DivergenceScore>& scores) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : scores)
        arr.push_back({{"source", s.source_id},
                       {"target", s.target_id},
                       {"method", method_name(s.method)},
                       {"value", s.value},
                       {"k", s.k_used},
                       {"seed", s.seed}});
    return arr.dump(2) + "\n";
}

std::vector<DivergenceScore> scores_from_json(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("score records: ") + e.what());
    }
    std::vector<DivergenceScore> out;
    try {
        for (const auto& j : arr) {
            DivergenceScore s;
            s.source_id = j.at("source").get<std::string>();
            s.target_id = j.at("target").get<std::string>();
            s.method = method_from_name(j.at("method").get<std::string>());
            s.value = j.at("value").get<double>();
            s.k_used = j.at("k").get<size_t>();
            s.seed = j.at("seed").get<uint64_t>();
            out.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("score records: ") + e.what());
    }
    return out;
}

void save_scores(const std::vector<DivergenceScore>& scores, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot write scores: " + path);
    f << scores_to_json(scores);
}

std::vector<DivergenceScore> load_scores(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot read scores: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return scores_from_json(text);
}

} // namespace securekl
