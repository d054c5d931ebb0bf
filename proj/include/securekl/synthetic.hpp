#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "securekl/dataset.hpp"

namespace securekl {

// ===== multi-site synthetic data with known ground truth =====
//
// Sites come in pairs that share a sampling distribution (direction,
// shift, covariance); the pair sibling is each site's planted beneficial
// partner. Shift magnitude grows across pairs, giving a controllable
// divergence dial, and one latent logistic teacher labels every site so
// that pooling matched data genuinely helps a downstream model.

struct GeneratorConfig {
    size_t n_sites = 12;
    size_t samples_per_site = 3000;  // uniform across sites
    size_t d = 20;
    /// Per-site mean-shift magnitudes; empty = pair p gets 0.4 * p.
    std::vector<double> shift_scale;
    /// Per-site covariance multipliers; empty = all 1.0.
    std::vector<double> cov_scale;
    /// Per-site label flip probabilities in [0, 0.5); empty = all 0.05.
    std::vector<double> label_noise;
    /// 0 = demographics independent of the shift; 1 = fully determined.
    double demo_shift_correlation = 0.6;
    uint64_t master_seed = 1;
};

struct GridManifest {
    GeneratorConfig cfg;  // with per-site vectors resolved
    /// source site -> sites built from the same distribution
    std::map<std::string, std::vector<std::string>> beneficial_map;
};

struct GeneratedGrid {
    std::vector<SiteDataset> sites;
    GridManifest manifest;
};

std::string site_name(size_t index);  // "site_00", "site_01", ...

/// Deterministic in (config, master_seed); throws ConfigInvalid.
GeneratedGrid generate_sites(const GeneratorConfig& cfg);

void save_manifest(const GridManifest& m, const std::string& path);
GridManifest load_manifest(const std::string& path);

} // namespace securekl
