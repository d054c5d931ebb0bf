#pragma once

#include <map>
#include <string>
#include <vector>

namespace securekl {

// ===== site datasets and their CSV format =====
//
// One CSV per site: header f1,...,fd,y,demo_<attr>,...; features are
// reals, y is 0/1, demographic cells are small category codes. Attribute
// histograms are derived from the per-row codes on load.

struct SiteDataset {
    std::string site_id;
    size_t n = 0, d = 0;
    std::vector<double> X;  // row-major [n x d]
    std::vector<double> y;  // each 0.0 or 1.0
    /// Per-row category codes keyed by attribute name ("gender", ...).
    std::map<std::string, std::vector<int>> demo_rows;
    /// Per-attribute probability histograms over category codes.
    std::map<std::string, std::vector<double>> demographics;

    double x_at(size_t i, size_t j) const { return X[i * d + j]; }
};

/// Rebuild `demographics` from `demo_rows` (histogram over codes 0..max).
void refresh_demographics(SiteDataset& site);

/// Shape/value checks; throws SchemaError with a row/column diagnostic.
void validate_site(const SiteDataset& site);

void save_site_csv(const SiteDataset& site, const std::string& path);
SiteDataset load_site_csv(const std::string& path, const std::string& site_id);

/// Loads every *.csv in the directory (file stem = site id), sorted by id.
std::vector<SiteDataset> load_sites(const std::string& dir);
/// Writes <site_id>.csv per site into the directory (created if needed).
void save_sites(const std::vector<SiteDataset>& sites, const std::string& dir);

} // namespace securekl
