#include "securekl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "securekl/errors.hpp"

namespace securekl {

namespace {

// Canonical column order for the well-known attributes; anything else is
// appended alphabetically.
const char* kKnownAttrs[] = {"gender", "age", "race"};

std::vector<std::string> demo_column_order(const SiteDataset& site) {
    std::vector<std::string> order;
    for (const char* a : kKnownAttrs) {
        if (site.demo_rows.count(a)) order.push_back(a);
    }
    for (const auto& [name, _] : site.demo_rows) {
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    }
    return order;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_real(const std::string& cell, size_t row, const std::string& col) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) {
        throw SchemaError("row " + std::to_string(row) + ", column '" + col +
                          "': bad numeric value '" + cell + "'");
    }
    return v;
}

} // namespace

void refresh_demographics(SiteDataset& site) {
    site.demographics.clear();
    for (const auto& [name, codes] : site.demo_rows) {
        int max_code = -1;
        for (int c : codes) max_code = std::max(max_code, c);
        std::vector<double> hist(static_cast<size_t>(max_code + 1), 0.0);
        for (int c : codes) hist[static_cast<size_t>(c)] += 1.0;
        for (double& h : hist) h /= static_cast<double>(codes.size());
        site.demographics[name] = std::move(hist);
    }
}

void validate_site(const SiteDataset& site) {
    if (site.X.size() != site.n * site.d) {
        throw SchemaError("site " + site.site_id + ": feature matrix is not n*d");
    }
    if (site.y.size() != site.n) {
        throw SchemaError("site " + site.site_id + ": label count != n");
    }
    for (size_t i = 0; i < site.n; ++i) {
        if (site.y[i] != 0.0 && site.y[i] != 1.0) {
            throw SchemaError("site " + site.site_id + ": row " + std::to_string(i + 1) +
                              ", column 'y': label must be 0 or 1");
        }
    }
    for (double v : site.X) {
        if (!std::isfinite(v)) {
            throw SchemaError("site " + site.site_id + ": non-finite feature value");
        }
    }
    for (const auto& [name, codes] : site.demo_rows) {
        if (codes.size() != site.n) {
            throw SchemaError("site " + site.site_id + ": attribute '" + name +
                              "' has wrong row count");
        }
    }
    for (const auto& [name, hist] : site.demographics) {
        double sum = 0;
        for (double h : hist) sum += h;
        if (std::fabs(sum - 1.0) > 1e-9) {
            throw SchemaError("site " + site.site_id + ": histogram for '" + name +
                              "' does not sum to 1");
        }
    }
}

void save_site_csv(const SiteDataset& site, const std::string& path) {
    validate_site(site);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw SchemaError("cannot write " + path);

    auto demo_order = demo_column_order(site);
    for (size_t j = 0; j < site.d; ++j) os << "f" << (j + 1) << ",";
    os << "y";
    for (const auto& name : demo_order) os << ",demo_" << name;
    os << "\n";

    char buf[64];
    for (size_t i = 0; i < site.n; ++i) {
        for (size_t j = 0; j < site.d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", site.x_at(i, j));
            os << buf << ",";
        }
        os << (site.y[i] == 1.0 ? "1" : "0");
        for (const auto& name : demo_order) os << "," << site.demo_rows.at(name)[i];
        os << "\n";
    }
    if (!os) throw SchemaError("short write on " + path);
}

SiteDataset load_site_csv(const std::string& path, const std::string& site_id) {
    std::ifstream is(path);
    if (!is) throw SchemaError("cannot open " + path);

    std::string header;
    if (!std::getline(is, header)) throw SchemaError(path + ": empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    auto cols = split_csv_line(header);

    SiteDataset site;
    site.site_id = site_id;
    size_t y_col = SIZE_MAX;
    std::vector<std::pair<size_t, std::string>> demo_cols;  // column index -> attr name
    for (size_t c = 0; c < cols.size(); ++c) {
        const std::string& name = cols[c];
        if (name == "f" + std::to_string(site.d + 1) && y_col == SIZE_MAX) {
            ++site.d;
        } else if (name == "y" && y_col == SIZE_MAX) {
            y_col = c;
        } else if (name.rfind("demo_", 0) == 0 && y_col != SIZE_MAX) {
            demo_cols.emplace_back(c, name.substr(5));
        } else {
            throw SchemaError(path + ": unexpected column '" + name + "'");
        }
    }
    if (y_col == SIZE_MAX) throw SchemaError(path + ": missing required column 'y'");
    for (const auto& [_, attr] : demo_cols) site.demo_rows[attr] = {};

    std::string line;
    size_t row = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != cols.size()) {
            throw SchemaError(path + ": row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(cols.size()));
        }
        for (size_t j = 0; j < site.d; ++j) {
            site.X.push_back(parse_real(cells[j], row, cols[j]));
        }
        double label = parse_real(cells[y_col], row, "y");
        if (label != 0.0 && label != 1.0) {
            throw SchemaError(path + ": row " + std::to_string(row) +
                              ", column 'y': label must be 0 or 1, got '" + cells[y_col] + "'");
        }
        site.y.push_back(label);
        for (const auto& [c, attr] : demo_cols) {
            double v = parse_real(cells[c], row, cols[c]);
            if (v < 0 || v != std::floor(v)) {
                throw SchemaError(path + ": row " + std::to_string(row) + ", column '" + cols[c] +
                                  "': category code must be a small non-negative integer");
            }
            site.demo_rows[attr].push_back(static_cast<int>(v));
        }
        ++site.n;
    }
    if (site.n == 0) throw SchemaError(path + ": no data rows");
    refresh_demographics(site);
    validate_site(site);
    return site;
}

std::vector<SiteDataset> load_sites(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw SchemaError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw SchemaError("no site CSV files in " + dir);
    std::vector<SiteDataset> sites;
    sites.reserve(files.size());
    for (const auto& f : files) sites.push_back(load_site_csv(f.string(), f.stem().string()));
    return sites;
}

void save_sites(const std::vector<SiteDataset>& sites, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& s : sites) {
        save_site_csv(s, (fs::path(dir) / (s.site_id + ".csv")).string());
    }
}

} // namespace securekl
