#include "securekl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "securekl/errors.hpp"
#include "securekl/rng.hpp"

namespace securekl {

namespace {

// Demographic attributes are carved out of a latent standard normal at
// fixed quantile cuts, so their marginals stay pinned regardless of the
// shift/correlation dials.
struct DemoAttr {
    const char* name;
    std::vector<double> cuts;  // Phi^-1 of the cumulative marginals
};

const std::vector<DemoAttr>& demo_attrs() {
    static const std::vector<DemoAttr> attrs = {
        // gender: 50 / 50
        {"gender", {0.0}},
        // age: 30 / 40 / 30
        {"age", {-0.5244005127080409, 0.5244005127080409}},
        // race: 40 / 30 / 20 / 10
        {"race", {-0.2533471031357997, 0.5244005127080409, 1.2815515655446004}},
    };
    return attrs;
}

int bucket(double t, const std::vector<double>& cuts) {
    int b = 0;
    for (double c : cuts)
        if (t > c) ++b;
    return b;
}

std::vector<double> resolve(std::vector<double> v, size_t n, double dflt,
                            const char* what) {
    if (v.empty()) v.assign(n, dflt);
    if (v.size() != n)
        throw ConfigInvalid(std::string(what) + ": expected " + std::to_string(n) +
                            " per-site entries, got " + std::to_string(v.size()));
    return v;
}

std::vector<double> unit_direction(Rng& rng, size_t d) {
    std::vector<double> u(d);
    double norm2 = 0.0;
    for (auto& x : u) {
        x = rng.normal();
        norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
    for (auto& x : u) x *= inv;
    return u;
}

} // namespace

std::string site_name(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "site_%02zu", index);
    return buf;
}

static GeneratorConfig validated(GeneratorConfig cfg) {
    if (cfg.n_sites < 2 || cfg.n_sites % 2 != 0)
        throw ConfigInvalid("n_sites must be even and >= 2 (sites come in matched pairs)");
    if (cfg.samples_per_site < 2)
        throw ConfigInvalid("samples_per_site must be >= 2");
    if (cfg.d < 1) throw ConfigInvalid("d must be >= 1");
    if (cfg.demo_shift_correlation < 0.0 || cfg.demo_shift_correlation > 1.0)
        throw ConfigInvalid("demo_shift_correlation must lie in [0, 1]");

    // Default shift ladder: pair p sits at distance 0.4 * p from the origin.
    if (cfg.shift_scale.empty()) {
        cfg.shift_scale.resize(cfg.n_sites);
        for (size_t i = 0; i < cfg.n_sites; ++i)
            cfg.shift_scale[i] = double(4 * (i / 2)) / 10.0;  // 0.4 per rung, decimal-exact
    }
    cfg.shift_scale = resolve(std::move(cfg.shift_scale), cfg.n_sites, 0.0, "shift_scale");
    cfg.cov_scale = resolve(std::move(cfg.cov_scale), cfg.n_sites, 1.0, "cov_scale");
    cfg.label_noise = resolve(std::move(cfg.label_noise), cfg.n_sites, 0.05, "label_noise");

    for (size_t i = 0; i < cfg.n_sites; ++i) {
        if (!(cfg.shift_scale[i] >= 0.0) || !std::isfinite(cfg.shift_scale[i]))
            throw ConfigInvalid("shift_scale[" + std::to_string(i) + "] must be finite and >= 0");
        if (!(cfg.cov_scale[i] > 0.0) || !std::isfinite(cfg.cov_scale[i]))
            throw ConfigInvalid("cov_scale[" + std::to_string(i) + "] must be finite and > 0");
        if (!(cfg.label_noise[i] >= 0.0) || !(cfg.label_noise[i] < 0.5))
            throw ConfigInvalid("label_noise[" + std::to_string(i) + "] must lie in [0, 0.5)");
    }
    return cfg;
}

GeneratedGrid generate_sites(const GeneratorConfig& raw) {
    GeneratorConfig cfg = validated(raw);
    const size_t n = cfg.samples_per_site, d = cfg.d;

    // Global structure shared by every site: one labelling teacher, one
    // latent direction per demographic attribute, one shift direction per
    // site pair. Drawn from tagged child seeds so adding sites or rows
    // never perturbs them.
    Rng teacher_rng(derive_seed(cfg.master_seed, "teacher"));
    std::vector<double> teacher(d);
    {
        double norm2 = 0.0;
        for (auto& w : teacher) {
            w = teacher_rng.normal();
            norm2 += w * w;
        }
        double scale = 3.0 / std::sqrt(std::max(norm2, 1e-300));
        for (auto& w : teacher) w *= scale;  // |w*| = 3: labels are informative, not trivial
    }

    Rng demo_rng(derive_seed(cfg.master_seed, "demo"));
    std::vector<std::vector<double>> demo_dirs;
    for (size_t a = 0; a < demo_attrs().size(); ++a)
        demo_dirs.push_back(unit_direction(demo_rng, d));

    std::vector<std::vector<double>> pair_dirs(cfg.n_sites / 2);
    for (size_t p = 0; p < pair_dirs.size(); ++p) {
        Rng pr(derive_seed(cfg.master_seed, "pair:" + std::to_string(p)));
        pair_dirs[p] = unit_direction(pr, d);
    }

    GeneratedGrid out;
    out.manifest.cfg = cfg;
    const double dial = cfg.demo_shift_correlation;
    const double resid = std::sqrt(std::max(0.0, 1.0 - dial * dial));

    for (size_t s = 0; s < cfg.n_sites; ++s) {
        const auto& u = pair_dirs[s / 2];
        const double shift = cfg.shift_scale[s];
        const double sd = std::sqrt(cfg.cov_scale[s]);
        const double noise = cfg.label_noise[s];

        SiteDataset site;
        site.site_id = site_name(s);
        site.n = n;
        site.d = d;
        site.X.resize(n * d);
        site.y.resize(n);
        for (const auto& attr : demo_attrs())
            site.demo_rows[attr.name].resize(n);

        // One fixed-order stream per site; every row consumes the same
        // draws (the flip uniform is always taken), so turning a dial
        // never shifts another site's — or another column's — stream.
        Rng rng(derive_seed(cfg.master_seed, site.site_id));
        for (size_t i = 0; i < n; ++i) {
            double* x = &site.X[i * d];
            double z = 0.0;  // teacher logit
            for (size_t j = 0; j < d; ++j) {
                x[j] = shift * u[j] + sd * rng.normal();
                z += x[j] * teacher[j];
            }
            double p = 1.0 / (1.0 + std::exp(-z));
            int label = rng.uniform() < p ? 1 : 0;
            if (rng.uniform() < noise) label = 1 - label;
            site.y[i] = label;

            // Each attribute's latent tracks the row's position along a
            // global direction, so sites with similar shifts end up with
            // similar demographic mixes; at shift 0 the latent is exactly
            // N(0,1) and the marginals hit their nominal rates.
            for (size_t a = 0; a < demo_attrs().size(); ++a) {
                double raw = 0.0;
                for (size_t j = 0; j < d; ++j) raw += x[j] * demo_dirs[a][j];
                double t = dial * (raw / sd) + resid * rng.normal();
                site.demo_rows[demo_attrs()[a].name][i] = bucket(t, demo_attrs()[a].cuts);
            }
        }
        refresh_demographics(site);
        validate_site(site);
        out.sites.push_back(std::move(site));
    }

    for (size_t s = 0; s < cfg.n_sites; ++s)
        out.manifest.beneficial_map[site_name(s)] = {site_name(s ^ 1)};
    return out;
}

void save_manifest(const GridManifest& m, const std::string& path) {
    nlohmann::json j;
    j["config"] = {
        {"n_sites", m.cfg.n_sites},
        {"samples_per_site", m.cfg.samples_per_site},
        {"d", m.cfg.d},
        {"shift_scale", m.cfg.shift_scale},
        {"cov_scale", m.cfg.cov_scale},
        {"label_noise", m.cfg.label_noise},
        {"demo_shift_correlation", m.cfg.demo_shift_correlation},
        {"master_seed", m.cfg.master_seed},
    };
    j["beneficial_map"] = m.beneficial_map;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot write manifest: " + path);
    f << j.dump(2) << "\n";
}

GridManifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot read manifest: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("manifest " + path + ": " + e.what());
    }
    GridManifest m;
    try {
        const auto& c = j.at("config");
        m.cfg.n_sites = c.at("n_sites").get<size_t>();
        m.cfg.samples_per_site = c.at("samples_per_site").get<size_t>();
        m.cfg.d = c.at("d").get<size_t>();
        m.cfg.shift_scale = c.at("shift_scale").get<std::vector<double>>();
        m.cfg.cov_scale = c.at("cov_scale").get<std::vector<double>>();
        m.cfg.label_noise = c.at("label_noise").get<std::vector<double>>();
        m.cfg.demo_shift_correlation = c.at("demo_shift_correlation").get<double>();
        m.cfg.master_seed = c.at("master_seed").get<uint64_t>();
        m.beneficial_map =
            j.at("beneficial_map").get<std::map<std::string, std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("manifest " + path + ": " + e.what());
    }
    return m;
}

} // namespace securekl
