// securekl: generate multi-site data, score dataset divergence (plaintext
// or two-party secure), select data partners, and evaluate the outcomes.
//
// Exit codes: 0 success, 2 configuration error, 3 protocol/transport
// error, 4 data error.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "securekl/dataset.hpp"
#include "securekl/divergence.hpp"
#include "securekl/errors.hpp"
#include "securekl/evaluation.hpp"
#include "securekl/kde.hpp"
#include "securekl/mpc.hpp"
#include "securekl/provenance.hpp"
#include "securekl/rng.hpp"
#include "securekl/secure_ml.hpp"
#include "securekl/strategies.hpp"
#include "securekl/synthetic.hpp"
#include "securekl/trace.hpp"
#include "securekl/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace securekl;

namespace {

// ---------- small utilities ----------

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string join_csv(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

std::string join_csv(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt_double(v[i]);
    }
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot write " + path);
    f << text;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// SECUREKL_LOG=<path> turns on full protocol event capture.
const char* trace_log_path() {
    const char* p = std::getenv("SECUREKL_LOG");
    return (p && *p) ? p : nullptr;
}

void dump_trace(const TraceRecorder& trace, const std::string& path) {
    std::ostringstream os;
    trace.write_jsonl(os);
    write_file(path, os.str());
}

// ---------- shared option plumbing ----------

struct HpOptions {
    std::string config_path;  // optional JSON with hyperparameter overrides
    double clip_lo = -10.0;
    double clip_hi = 10.0;
};

/// Start from the mode's tuned defaults and apply any keys present in the
/// config file. Both parties of a secure run must use the same file; the
/// session handshake rejects mismatches.
SgdHyperparams resolve_hp(const HpOptions& o, bool secure_mode) {
    SgdHyperparams hp = secure_mode ? secure_sgd_defaults() : plain_sgd_defaults();
    if (o.config_path.empty()) return hp;
    json j;
    try {
        j = json::parse(read_file(o.config_path));
        if (j.contains("learning_rate")) hp.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("patience")) hp.patience = j["patience"].get<int>();
        if (j.contains("tolerance")) hp.tolerance = j["tolerance"].get<double>();
        if (j.contains("momentum")) hp.momentum = j["momentum"].get<double>();
        if (j.contains("weight_decay")) hp.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("dampening")) hp.dampening = j["dampening"].get<double>();
        if (j.contains("max_epochs")) hp.max_epochs = j["max_epochs"].get<int>();
        if (j.contains("batch_size")) hp.batch_size = j["batch_size"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigInvalid("hyperparameter config " + o.config_path + ": " + e.what());
    }
    validate_hyperparams(hp);
    return hp;
}

void add_hp_params(ProvenanceBlock& b, const SgdHyperparams& hp, const HpOptions& o) {
    b.params["hp.learning_rate"] = fmt_double(hp.learning_rate);
    b.params["hp.patience"] = std::to_string(hp.patience);
    b.params["hp.tolerance"] = fmt_double(hp.tolerance);
    b.params["hp.momentum"] = fmt_double(hp.momentum);
    b.params["hp.weight_decay"] = fmt_double(hp.weight_decay);
    b.params["hp.dampening"] = fmt_double(hp.dampening);
    b.params["hp.max_epochs"] = std::to_string(hp.max_epochs);
    b.params["hp.batch_size"] = std::to_string(hp.batch_size);
    b.params["clip_lo"] = fmt_double(o.clip_lo);
    b.params["clip_hi"] = fmt_double(o.clip_hi);
}

json prov_as_json(const ProvenanceBlock& b) { return json::parse(provenance_to_json(b)); }

const SiteDataset& find_site(const std::vector<SiteDataset>& sites, const std::string& id) {
    for (const auto& s : sites)
        if (s.site_id == id) return s;
    throw ConfigInvalid("no site named '" + id + "' in the data directory");
}

/// Accepts either a bare score array or a CLI output object {provenance,
/// scores}.
std::vector<DivergenceScore> load_scores_flex(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw SchemaError("score file " + path + ": " + e.what());
    }
    if (j.is_object() && j.contains("scores")) j = j["scores"];
    return scores_from_json(j.dump());
}

/// Per-pair score seed; one rule everywhere (plain, secure, both
/// deployments) so the same pair under the same user seed always reuses
/// the same randomness.
uint64_t pair_seed(uint64_t user_seed, const std::string& src, const std::string& tgt) {
    return derive_seed(user_seed, "pair:" + src + "->" + tgt);
}

// Retry loop shared by in-process and two-process secure scoring: a
// fixed-point truncation wrap (rare, seed-determined) yields an
// implausible opened score; both parties observe the same value and
// rederive the same fresh seed.
constexpr int kSecureAttempts = 3;
constexpr double kPlausibleLo = -0.05, kPlausibleHi = 1.05;

// ---------- gen ----------

struct GenArgs {
    std::string out;
    std::string config_path;
    int64_t seed = -1;  // <0 = keep the config's master seed
};

int run_gen(const GenArgs& a) {
    GeneratorConfig cfg;
    if (!a.config_path.empty()) {
        json j;
        try {
            j = json::parse(read_file(a.config_path));
            if (j.contains("n_sites")) cfg.n_sites = j["n_sites"].get<size_t>();
            if (j.contains("samples_per_site"))
                cfg.samples_per_site = j["samples_per_site"].get<size_t>();
            if (j.contains("d")) cfg.d = j["d"].get<size_t>();
            if (j.contains("shift_scale"))
                cfg.shift_scale = j["shift_scale"].get<std::vector<double>>();
            if (j.contains("cov_scale")) cfg.cov_scale = j["cov_scale"].get<std::vector<double>>();
            if (j.contains("label_noise"))
                cfg.label_noise = j["label_noise"].get<std::vector<double>>();
            if (j.contains("demo_shift_correlation"))
                cfg.demo_shift_correlation = j["demo_shift_correlation"].get<double>();
            if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<uint64_t>();
        } catch (const json::exception& e) {
            throw ConfigInvalid("generator config " + a.config_path + ": " + e.what());
        }
    }
    if (a.seed >= 0) cfg.master_seed = uint64_t(a.seed);

    GeneratedGrid grid = generate_sites(cfg);
    save_sites(grid.sites, a.out);
    save_manifest(grid.manifest, (fs::path(a.out) / "manifest.json").string());

    ProvenanceBlock b;
    b.command = "gen";
    const GeneratorConfig& rc = grid.manifest.cfg;  // resolved per-site vectors
    b.params["n_sites"] = std::to_string(rc.n_sites);
    b.params["samples_per_site"] = std::to_string(rc.samples_per_site);
    b.params["d"] = std::to_string(rc.d);
    b.params["shift_scale"] = join_csv(rc.shift_scale);
    b.params["cov_scale"] = join_csv(rc.cov_scale);
    b.params["label_noise"] = join_csv(rc.label_noise);
    b.params["demo_shift_correlation"] = fmt_double(rc.demo_shift_correlation);
    b.params["master_seed"] = std::to_string(rc.master_seed);
    write_file((fs::path(a.out) / "provenance.json").string(), provenance_to_json(b) + "\n");

    std::cout << "wrote " << grid.sites.size() << " sites to " << a.out << "\n";
    return 0;
}

// ---------- score ----------

struct ScoreArgs {
    std::string mode = "plain";
    std::string method = "KL_XY";
    std::string data;  // directory (plain / in-process) or own CSV (two-process)
    std::string source;
    std::vector<std::string> targets;
    uint64_t seed = 0;
    size_t k = 0;  // 0 = all rows
    bool strict = false;
    std::string out;
    HpOptions hp;
    // two-process topology
    int role = -1;  // -1 = in-process
    int listen_port = -1;
    std::string peer;
    std::string dealer;
};

ScoreMethod resolve_method(const std::string& name, bool secure_mode) {
    ScoreMethod m = method_from_name(name);
    if (!secure_mode) {
        if (m == ScoreMethod::secure_kl_xy || m == ScoreMethod::secure_kl_x)
            throw ConfigInvalid("method " + name + " requires --mode secure");
        return m;
    }
    switch (m) {  // secure mode accepts either spelling of the family
        case ScoreMethod::kl_xy:
        case ScoreMethod::secure_kl_xy: return ScoreMethod::secure_kl_xy;
        case ScoreMethod::kl_x:
        case ScoreMethod::secure_kl_x: return ScoreMethod::secure_kl_x;
        case ScoreMethod::kde_kl:
            throw ConfigInvalid("KDE_KL is a plaintext-only method");
    }
    throw ConfigInvalid("unknown method");
}

ProvenanceBlock score_provenance(const ScoreArgs& a, ScoreMethod method,
                                 const std::string& source_id,
                                 const std::vector<std::string>& target_ids,
                                 const SgdHyperparams& hp) {
    ProvenanceBlock b;
    b.command = "score";
    b.params["mode"] = a.mode;
    b.params["method"] = method_name(method);
    b.params["source"] = source_id;
    b.params["targets"] = join_csv(target_ids);
    b.params["seed"] = std::to_string(a.seed);
    b.params["k"] = std::to_string(a.k);
    b.params["strict"] = a.strict ? "1" : "0";
    if (method != ScoreMethod::kde_kl) add_hp_params(b, hp, a.hp);
    // Local paths and transport flags stay out: both parties of a secure
    // run must write byte-identical outputs.
    if (a.mode == "plain") b.params["data"] = a.data;
    return b;
}

void write_scores_output(const std::string& out_path, const ProvenanceBlock& prov,
                         const std::vector<DivergenceScore>& scores) {
    json j;
    j["provenance"] = prov_as_json(prov);
    j["scores"] = json::parse(scores_to_json(scores));
    write_file(out_path, j.dump(2) + "\n");
}

int run_score_local(const ScoreArgs& a) {
    const bool secure = a.mode == "secure";
    ScoreMethod method = resolve_method(a.method, secure);
    SgdHyperparams hp = resolve_hp(a.hp, secure);

    auto sites = load_sites(a.data);
    if (a.source.empty()) throw ConfigInvalid("--source is required");
    const SiteDataset& src = find_site(sites, a.source);
    std::vector<std::string> target_ids = a.targets;
    if (target_ids.empty())
        for (const auto& s : sites)
            if (s.site_id != src.site_id) target_ids.push_back(s.site_id);

    std::vector<DivergenceScore> scores;
    for (const auto& tid : target_ids) {
        const SiteDataset& tgt = find_site(sites, tid);
        ScoreOptions opt;
        opt.seed = pair_seed(a.seed, src.site_id, tgt.site_id);
        opt.k_target = a.k > 0 ? a.k : SIZE_MAX;
        opt.clip_lo = a.hp.clip_lo;
        opt.clip_hi = a.hp.clip_hi;
        opt.strict = a.strict;
        if (method == ScoreMethod::kde_kl) {
            KdeOptions ko;
            ko.seed = opt.seed;
            scores.push_back(kde_kl(src, tgt, ko));
        } else if (!secure) {
            scores.push_back(method == ScoreMethod::kl_xy ? kl_xy_plain(src, tgt, hp, opt)
                                                          : kl_x_plain(src, tgt, hp, opt));
        } else {
            const char* log = trace_log_path();
            TraceRecorder t0(log != nullptr), t1(log != nullptr);
            scores.push_back(secure_score_inprocess(method, src, tgt, hp, opt,
                                                    log ? &t0 : nullptr, log ? &t1 : nullptr));
            if (log) {
                std::string stem = std::string(log) + "." + src.site_id + "." + tgt.site_id;
                dump_trace(t0, stem + ".p0");
                dump_trace(t1, stem + ".p1");
            }
        }
    }

    write_scores_output(a.out, score_provenance(a, method, src.site_id, target_ids, hp), scores);
    std::cout << "wrote " << scores.size() << " score(s) to " << a.out << "\n";
    return 0;
}

/// Pre-session hello: each party announces its role, site id and public
/// shape over the party-party channel before the protocol starts.
json exchange_party_hello(Channel& chan, int role, const SiteDataset& mine) {
    json me;
    me["role"] = role;
    me["site"] = mine.site_id;
    me["n"] = mine.n;
    me["d"] = mine.d;
    std::string text = me.dump();
    FrameHeader h;
    h.opcode = uint8_t(Opcode::hello);
    h.payload_len = uint32_t(text.size());
    chan.send(h, reinterpret_cast<const uint8_t*>(text.data()), text.size());

    std::vector<uint8_t> payload;
    FrameHeader ph = chan.recv(payload);
    if (ph.opcode != uint8_t(Opcode::hello))
        throw ProtocolDesync("expected a peer hello before the session");
    json peer;
    try {
        peer = json::parse(std::string(payload.begin(), payload.end()));
    } catch (const json::exception& e) {
        throw ProtocolDesync(std::string("malformed peer hello: ") + e.what());
    }
    if (!peer.contains("role") || peer["role"].get<int>() != 1 - role)
        throw ProtocolDesync("peer announced the wrong role");
    return peer;
}

int run_score_two_process(const ScoreArgs& a) {
    if (a.role != 0 && a.role != 1) throw ConfigInvalid("--role must be 0 or 1");
    if (a.dealer.empty()) throw ConfigInvalid("secure two-process mode needs --dealer host:port");
    ScoreMethod method = resolve_method(a.method, true);
    SgdHyperparams hp = resolve_hp(a.hp, true);

    if (!fs::is_regular_file(a.data))
        throw ConfigInvalid("--data must be this party's site CSV in two-process mode");
    SiteDataset mine = load_site_csv(a.data, fs::path(a.data).stem().string());

    // Party 0 listens for party 1; both dial the dealer.
    std::unique_ptr<Channel> peer_chan;
    if (a.role == 0) {
        if (a.listen_port < 0) throw ConfigInvalid("party 0 needs --listen PORT");
        TcpListener listener(uint16_t(a.listen_port));
        peer_chan = listener.accept_one();
    } else {
        if (a.peer.empty()) throw ConfigInvalid("party 1 needs --peer host:port");
        auto [host, port] = parse_endpoint(a.peer);
        peer_chan = tcp_connect(host, port);
    }
    auto [dhost, dport] = parse_endpoint(a.dealer);
    auto dealer_chan = tcp_connect(dhost, dport);

    json peer = exchange_party_hello(*peer_chan, a.role, mine);
    const std::string src_id = a.role == 0 ? mine.site_id : peer["site"].get<std::string>();
    const std::string tgt_id = a.role == 0 ? peer["site"].get<std::string>() : mine.site_id;
    const size_t n_src = a.role == 0 ? mine.n : peer["n"].get<size_t>();
    const size_t n_tgt = a.role == 0 ? peer["n"].get<size_t>() : mine.n;
    if (peer["d"].get<size_t>() != mine.d)
        throw SessionMismatch("parties hold different feature dimensions");

    const uint64_t pseed = pair_seed(a.seed, src_id, tgt_id);
    const char* log = trace_log_path();

    for (int attempt = 0; attempt < kSecureAttempts; ++attempt) {
        ScoreOptions opt;
        opt.seed = attempt == 0 ? pseed : derive_seed(pseed, "retry:" + std::to_string(attempt));
        opt.k_target = a.k > 0 ? a.k : SIZE_MAX;
        opt.clip_lo = a.hp.clip_lo;
        opt.clip_hi = a.hp.clip_hi;
        opt.strict = a.strict;

        SecureScoreSpec spec;
        spec.source_id = src_id;
        spec.target_id = tgt_id;
        spec.n_src = n_src;
        spec.n_tgt = n_tgt;
        spec.d = mine.d;
        spec.hp = hp;
        spec.opt = opt;

        // Same derivations as the in-process runner: transcripts match.
        SessionParams params;
        params.seed = derive_seed(opt.seed, "session");
        params.session_id = uint32_t(fnv1a(src_id + "|" + tgt_id, opt.seed) | 1u);

        TraceRecorder trace(log != nullptr);
        DealerChannelSource triples(a.role, params.session_id, *dealer_chan, &trace);
        PartySession session(a.role, params, *peer_chan, triples, trace);
        DivergenceScore sc;
        try {
            sc = method == ScoreMethod::secure_kl_xy ? kl_xy_secure(session, mine, spec)
                                                     : kl_x_secure(session, mine, spec);
        } catch (const NonFinite&) {
            // A wrap surfaced mid-run (e.g. an opened epoch loss). Both
            // parties see the same opened value, so both abandon this
            // attempt here; closing the triple stream keeps the dealer in
            // step for the retry session.
            session.finish();
            continue;
        }
        session.finish();

        if (sc.value >= kPlausibleLo && sc.value <= kPlausibleHi) {
            sc.value = std::clamp(sc.value, 0.0, 1.0);
            sc.seed = pseed;
            if (log) dump_trace(trace, log);
            ScoreArgs shared = a;  // provenance must match the peer's
            write_scores_output(a.out, score_provenance(shared, method, src_id, {tgt_id}, hp),
                                {sc});
            std::cout << "wrote 1 score to " << a.out << "\n";
            return 0;
        }
    }
    throw NonFinite("secure score stayed implausible across retries");
}

// ---------- dealer ----------

struct DealerArgs {
    int listen_port = -1;
    uint64_t seed = 0;
    std::string source;
    std::string target;
};

int run_dealer(const DealerArgs& a) {
    if (a.listen_port < 0) throw ConfigInvalid("dealer needs --listen PORT");
    if (a.source.empty() || a.target.empty())
        throw ConfigInvalid("dealer needs --source and --target to derive its seed chain");
    TcpListener listener(uint16_t(a.listen_port));
    auto chan_a = listener.accept_one();
    auto chan_b = listener.accept_one();

    const uint64_t pseed = pair_seed(a.seed, a.source, a.target);
    int served = 0;
    for (int attempt = 0; attempt < kSecureAttempts; ++attempt) {
        uint64_t oseed =
            attempt == 0 ? pseed : derive_seed(pseed, "retry:" + std::to_string(attempt));
        uint64_t dealer_seed = derive_seed(derive_seed(oseed, "session"), "dealer");
        try {
            run_dealer_session(*chan_a, *chan_b, dealer_seed);
        } catch (const TransportError&) {
            break;  // parties closed: the previous session satisfied them
        }
        ++served;
    }
    std::cout << "dealer: served " << served << " session(s)\n";
    return 0;
}

// ---------- select ----------

struct SelectArgs {
    std::string data;
    std::string scores_path;
    std::string source;
    std::string strategy;
    size_t n = 1;
    size_t k = 0;
    std::string attribute = "gender";
    uint64_t seed = 0;
    bool strict = false;
    std::string out;
    HpOptions hp;
};

json ranking_json(const std::vector<RankedCandidate>& ranking) {
    json arr = json::array();
    for (const auto& r : ranking) {
        json row;
        row["target"] = r.target_id;
        row["value"] = r.value;
        arr.push_back(row);
    }
    return arr;
}

void write_selection_output(const std::string& out_path, const ProvenanceBlock& prov,
                            const std::string& source_id, const std::string& strategy,
                            const StrategySpec& spec, const std::string& leakage, size_t k_used,
                            const std::vector<RankedCandidate>& ranking,
                            const std::vector<std::string>& selected,
                            const std::vector<DivergenceScore>& scores) {
    json j;
    j["provenance"] = prov_as_json(prov);
    j["source"] = source_id;
    j["strategy"] = strategy;
    j["n"] = spec.n;
    j["k"] = spec.k;
    j["attribute"] = spec.attribute;
    j["seed"] = spec.seed;
    j["leakage"] = leakage;
    j["k_used"] = k_used;
    j["ranking"] = ranking_json(ranking);
    j["selected"] = selected;
    if (!scores.empty()) j["scores"] = json::parse(scores_to_json(scores));
    write_file(out_path, j.dump(2) + "\n");
}

/// Selection straight from a score file: the greedy argmin-n application.
int run_select_from_scores(const SelectArgs& a) {
    auto scores = load_scores_flex(a.scores_path);
    if (scores.empty()) throw IncompleteScores("score file has no records");

    std::string source = a.source;
    if (source.empty()) {
        source = scores.front().source_id;
        for (const auto& s : scores)
            if (s.source_id != source)
                throw ConfigInvalid("score file covers several sources; pass --source");
    }

    std::vector<RankedCandidate> ranking;
    std::vector<DivergenceScore> used;
    for (const auto& s : scores)
        if (s.source_id == source) {
            ranking.push_back({s.target_id, s.value});
            used.push_back(s);
        }
    if (ranking.empty()) throw IncompleteScores("no scores for source '" + source + "'");

    if (!a.data.empty()) {
        // With the data directory in hand the candidate set is known:
        // every candidate must have a score.
        auto sites = load_sites(a.data);
        std::map<std::string, bool> have;
        for (const auto& r : ranking) have[r.target_id] = true;
        for (const auto& s : sites)
            if (s.site_id != source && !have.count(s.site_id))
                throw IncompleteScores("no score for candidate '" + s.site_id + "'");
    }

    auto selected = select_by_score(ranking, a.n);

    bool all_secure = true;
    size_t k_used = 0;
    for (const auto& s : used) {
        all_secure = all_secure && (s.method == ScoreMethod::secure_kl_xy ||
                                    s.method == ScoreMethod::secure_kl_x);
        k_used = std::max(k_used, s.k_used);
    }
    StrategySpec spec;
    spec.kind = all_secure ? StrategyKind::private_score : StrategyKind::subset;
    spec.n = a.n;
    spec.seed = a.seed;

    ProvenanceBlock b;
    b.command = "select";
    b.params["scores"] = a.scores_path;
    b.params["source"] = source;
    b.params["n"] = std::to_string(a.n);
    b.params["seed"] = std::to_string(a.seed);
    if (!a.data.empty()) b.params["data"] = a.data;

    write_selection_output(a.out, b, source, strategy_name(spec.kind), spec,
                           leakage_tag(spec.kind), k_used, ranking, selected, used);
    std::cout << "selected [" << join_csv(selected) << "] for " << source << "\n";
    return 0;
}

int run_select(const SelectArgs& a) {
    if (!a.scores_path.empty()) return run_select_from_scores(a);
    if (a.data.empty() || a.strategy.empty())
        throw ConfigInvalid("select needs either --scores or --data with --strategy");
    if (a.source.empty()) throw ConfigInvalid("--source is required");

    StrategySpec spec;
    spec.kind = strategy_from_name(a.strategy);
    spec.n = a.n;
    spec.k = a.k;
    spec.attribute = a.attribute;
    spec.seed = a.seed;

    auto sites = load_sites(a.data);
    const SiteDataset& src = find_site(sites, a.source);
    ScoreOptions opt;
    opt.seed = 0;  // per-pair seeds derive from spec.seed inside
    opt.clip_lo = a.hp.clip_lo;
    opt.clip_hi = a.hp.clip_hi;
    opt.strict = a.strict;

    SgdHyperparams plain_hp = resolve_hp(a.hp, false);
    SgdHyperparams secure_hp = resolve_hp(a.hp, true);
    SelectionRecord rec = run_strategy(spec, src, sites, plain_hp, secure_hp, opt);

    ProvenanceBlock b;
    b.command = "select";
    b.params["data"] = a.data;
    b.params["source"] = a.source;
    b.params["strategy"] = strategy_name(spec.kind);
    b.params["n"] = std::to_string(spec.n);
    b.params["k"] = std::to_string(spec.k);
    b.params["attribute"] = spec.attribute;
    b.params["seed"] = std::to_string(spec.seed);
    b.params["strict"] = a.strict ? "1" : "0";
    if (spec.kind == StrategyKind::subset || spec.kind == StrategyKind::private_score) {
        SgdHyperparams used = spec.kind == StrategyKind::subset ? plain_hp : secure_hp;
        add_hp_params(b, used, a.hp);
    }

    write_selection_output(a.out, b, src.site_id, strategy_name(spec.kind), spec, rec.leakage,
                           rec.k_used, rec.ranking, rec.selected, rec.scores);
    std::cout << "selected [" << join_csv(rec.selected) << "] for " << src.site_id << "\n";
    return 0;
}

// ---------- evaluate ----------

struct EvaluateArgs {
    std::string data;
    std::vector<std::string> selections;
    size_t folds = 5;
    size_t repeats = 5;
    size_t train_budget = 1500;
    size_t test_budget = 400;
    uint64_t seed = 0;
    std::string out;  // flat CSV; .summary.csv and .json siblings
};

std::string sibling_path(const std::string& out, const std::string& old_ext,
                         const std::string& new_ext) {
    if (out.size() > old_ext.size() && out.substr(out.size() - old_ext.size()) == old_ext)
        return out.substr(0, out.size() - old_ext.size()) + new_ext;
    return out + new_ext;
}

int run_evaluate(const EvaluateArgs& a) {
    if (a.selections.empty()) throw ConfigInvalid("evaluate needs at least one --selection file");
    auto sites = load_sites(a.data);

    DeltaEvalConfig cfg;
    cfg.folds = a.folds;
    cfg.repeats = a.repeats;
    cfg.train_budget = a.train_budget;
    cfg.test_budget = a.test_budget;
    cfg.seed = a.seed;

    std::vector<StrategyOutcome> outcomes;
    for (const auto& path : a.selections) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw SchemaError("selection file " + path + ": " + e.what());
        }
        StrategySpec spec;
        std::string source_id;
        std::vector<std::string> selected;
        try {
            source_id = j.at("source").get<std::string>();
            spec.kind = strategy_from_name(j.at("strategy").get<std::string>());
            spec.n = j.at("n").get<size_t>();
            spec.k = j.at("k").get<size_t>();
            spec.attribute = j.at("attribute").get<std::string>();
            spec.seed = j.at("seed").get<uint64_t>();
            selected = j.at("selected").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw SchemaError("selection file " + path + ": " + e.what());
        }

        const SiteDataset& src = find_site(sites, source_id);
        std::vector<const SiteDataset*> chosen;
        for (const auto& id : selected) chosen.push_back(&find_site(sites, id));

        StrategyOutcome out = delta_eval(src, chosen, cfg);
        out.strategy = spec;
        outcomes.push_back(out);
    }

    ProvenanceBlock b;
    b.command = "evaluate";
    b.params["data"] = a.data;
    b.params["selections"] = join_csv(a.selections);
    b.params["folds"] = std::to_string(a.folds);
    b.params["repeats"] = std::to_string(a.repeats);
    b.params["train_budget"] = std::to_string(a.train_budget);
    b.params["test_budget"] = std::to_string(a.test_budget);
    b.params["seed"] = std::to_string(a.seed);

    write_file(a.out, outcomes_to_csv(outcomes));
    write_file(sibling_path(a.out, ".csv", ".summary.csv"), outcomes_summary_csv(outcomes));
    json out_json;
    out_json["provenance"] = prov_as_json(b);
    out_json["outcomes"] = json::parse(outcomes_to_json(outcomes));
    write_file(sibling_path(a.out, ".csv", ".json"), out_json.dump(2) + "\n");

    std::cout << "evaluated " << outcomes.size() << " selection(s) into " << a.out << "\n";
    return 0;
}

// ---------- consistency ----------

struct ConsistencyArgs {
    std::string plain_path;
    std::string secure_path;
    double q = 0.05;
    std::string out;  // JSON; .csv sibling
};

int run_consistency(const ConsistencyArgs& a) {
    auto plain = load_scores_flex(a.plain_path);
    auto secure = load_scores_flex(a.secure_path);
    ConsistencyReport rep = consistency_report(plain, secure, a.q);

    ProvenanceBlock b;
    b.command = "consistency";
    b.params["plain"] = a.plain_path;
    b.params["secure"] = a.secure_path;
    b.params["q"] = fmt_double(a.q);

    json j;
    j["provenance"] = prov_as_json(b);
    j["report"] = json::parse(consistency_to_json(rep));
    write_file(a.out, j.dump(2) + "\n");
    write_file(sibling_path(a.out, ".json", ".csv"), consistency_to_csv(rep));

    std::cout << "mean rho " << rep.mean_rho << " across " << rep.per_source.size()
              << " source(s)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"securekl: private dataset divergence scoring and partner selection"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "generate a synthetic multi-site grid");
    cmd_gen->add_option("--out", gen.out, "output directory")->required();
    cmd_gen->add_option("--config", gen.config_path, "generator config JSON");
    cmd_gen->add_option("--seed", gen.seed, "override the master seed");

    ScoreArgs score;
    auto* cmd_score = app.add_subcommand("score", "score source-target divergence");
    cmd_score->add_option("--mode", score.mode, "plain | secure")
        ->check(CLI::IsMember({"plain", "secure"}));
    cmd_score->add_option("--method", score.method, "KL_XY | KL_X | KDE_KL");
    cmd_score->add_option("--data", score.data, "site directory, or own CSV with --role")
        ->required();
    cmd_score->add_option("--source", score.source, "source site id");
    cmd_score->add_option("--targets", score.targets, "target ids (default: all others)")
        ->delimiter(',');
    cmd_score->add_option("--seed", score.seed, "score seed");
    cmd_score->add_option("--k", score.k, "target rows to subsample (0 = all)");
    cmd_score->add_flag("--strict", score.strict, "open nothing but the final score");
    cmd_score->add_option("--out", score.out, "output JSON path")->required();
    cmd_score->add_option("--config", score.hp.config_path, "hyperparameter overrides JSON");
    cmd_score->add_option("--clip-lo", score.hp.clip_lo, "feature clip lower bound");
    cmd_score->add_option("--clip-hi", score.hp.clip_hi, "feature clip upper bound");
    cmd_score->add_option("--role", score.role, "two-process secure party role (0 or 1)");
    cmd_score->add_option("--listen", score.listen_port, "party 0: port to await party 1");
    cmd_score->add_option("--peer", score.peer, "party 1: party 0 endpoint host:port");
    cmd_score->add_option("--dealer", score.dealer, "dealer endpoint host:port");

    DealerArgs dealer;
    auto* cmd_dealer = app.add_subcommand("dealer", "serve correlated randomness for one pair");
    cmd_dealer->add_option("--listen", dealer.listen_port, "port to await both parties")
        ->required();
    cmd_dealer->add_option("--seed", dealer.seed, "user score seed (matches the parties)");
    cmd_dealer->add_option("--source", dealer.source, "source site id")->required();
    cmd_dealer->add_option("--target", dealer.target, "target site id")->required();

    SelectArgs select;
    auto* cmd_select = app.add_subcommand("select", "pick data partners");
    cmd_select->add_option("--data", select.data, "site directory");
    cmd_select->add_option("--scores", select.scores_path, "rank from an existing score file");
    cmd_select->add_option("--source", select.source, "source site id");
    cmd_select->add_option("--strategy", select.strategy,
                           "blind | demographic | subset | private");
    cmd_select->add_option("--n", select.n, "partners to select");
    cmd_select->add_option("--k", select.k, "subset strategy: rows per candidate (0 = 1%)");
    cmd_select->add_option("--attribute", select.attribute, "demographic strategy attribute");
    cmd_select->add_option("--seed", select.seed, "strategy seed");
    cmd_select->add_flag("--strict", select.strict, "secure scoring opens only final scores");
    cmd_select->add_option("--out", select.out, "output JSON path")->required();
    cmd_select->add_option("--config", select.hp.config_path, "hyperparameter overrides JSON");
    cmd_select->add_option("--clip-lo", select.hp.clip_lo, "feature clip lower bound");
    cmd_select->add_option("--clip-hi", select.hp.clip_hi, "feature clip upper bound");

    EvaluateArgs evaluate;
    auto* cmd_evaluate = app.add_subcommand("evaluate", "measure downstream AUC deltas");
    cmd_evaluate->add_option("--data", evaluate.data, "site directory")->required();
    cmd_evaluate->add_option("--selection", evaluate.selections, "selection JSON (repeatable)")
        ->required();
    cmd_evaluate->add_option("--folds", evaluate.folds, "cross-validation folds");
    cmd_evaluate->add_option("--repeats", evaluate.repeats, "cross-validation repeats");
    cmd_evaluate->add_option("--train-budget", evaluate.train_budget, "training rows per site");
    cmd_evaluate->add_option("--test-budget", evaluate.test_budget, "test rows per fold");
    cmd_evaluate->add_option("--seed", evaluate.seed, "evaluation seed");
    cmd_evaluate->add_option("--out", evaluate.out, "flat CSV path")->required();

    ConsistencyArgs consistency;
    auto* cmd_consistency =
        app.add_subcommand("consistency", "compare two score sets per source");
    cmd_consistency->add_option("--plain", consistency.plain_path, "first score file")
        ->required();
    cmd_consistency->add_option("--secure", consistency.secure_path, "second score file")
        ->required();
    cmd_consistency->add_option("--q", consistency.q, "FDR level");
    cmd_consistency->add_option("--out", consistency.out, "report JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the diagnostic
        return 2;
    }

    try {
        if (cmd_gen->parsed()) return run_gen(gen);
        if (cmd_score->parsed())
            return score.role >= 0 ? run_score_two_process(score) : run_score_local(score);
        if (cmd_dealer->parsed()) return run_dealer(dealer);
        if (cmd_select->parsed()) return run_select(select);
        if (cmd_evaluate->parsed()) return run_evaluate(evaluate);
        if (cmd_consistency->parsed()) return run_consistency(consistency);
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolDesync& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 3;
    } catch (const SessionMismatch& e) {
        std::cerr << "session error: " << e.what() << "\n";
        return 3;
    } catch (const TripleReuse& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const NonFinite& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
