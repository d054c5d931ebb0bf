// End-to-end checks that drive the installed binary through a shell:
// every subcommand, the exit-code contract, and byte-identity of secure
// score outputs across deployments.

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "securekl/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin_path() {
    const char* p = std::getenv("SECUREKL_BIN");
    REQUIRE_MESSAGE(p != nullptr, "SECUREKL_BIN must point at the securekl binary");
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& args) {
    std::string cmd = bin_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, got);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

/// Runs a whole shell script (used to juggle the three processes of a
/// two-process secure run).
int run_script(const std::string& script) {
    std::string cmd = "sh -c '" + script + "'";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), "missing file: " << p.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << text;
}

uint64_t file_hash(const fs::path& p) { return securekl::fnv1a(slurp(p), 0x1234); }

/// Fresh scratch dir per suite run; cleaned up by the fixture.
struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() /
              ("securekl_cli_" + std::to_string(uint64_t(getpid())) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

/// Small grid so secure scoring stays fast.
void make_grid(const Scratch& s, const std::string& name, int n_sites = 4, int rows = 150,
               int d = 3, uint64_t seed = 21) {
    json cfg;
    cfg["n_sites"] = n_sites;
    cfg["samples_per_site"] = rows;
    cfg["d"] = d;
    cfg["master_seed"] = seed;
    spit(s.dir / (name + ".cfg.json"), cfg.dump());
    auto r = run("gen --out " + (s / name) + " --config " + (s / (name + ".cfg.json")));
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
}

int free_port_base() { return 23000 + int(getpid() % 2000); }

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("generation is deterministic and validates its config") {
    Scratch s;

    SUBCASE("same seed, different directories, identical bytes") {
        make_grid(s, "a", 4, 100, 3, 77);
        make_grid(s, "b", 4, 100, 3, 77);
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(s / "a"))
            names.push_back(e.path().filename().string());
        CHECK(names.size() == 6);  // 4 sites + manifest + provenance
        for (const auto& n : names)
            CHECK_MESSAGE(file_hash(s.dir / "a" / n) == file_hash(s.dir / "b" / n), n);
    }

    SUBCASE("different seeds diverge") {
        make_grid(s, "a", 4, 100, 3, 77);
        make_grid(s, "c", 4, 100, 3, 78);
        CHECK(file_hash(s.dir / "a" / "site_00.csv") != file_hash(s.dir / "c" / "site_00.csv"));
    }

    SUBCASE("--seed flag overrides the config seed") {
        make_grid(s, "a", 4, 100, 3, 77);
        json cfg;
        cfg["n_sites"] = 4;
        cfg["samples_per_site"] = 100;
        cfg["d"] = 3;
        cfg["master_seed"] = 1234;
        spit(s.dir / "d.cfg.json", cfg.dump());
        auto r = run("gen --out " + (s / "d") + " --config " + (s / "d.cfg.json") + " --seed 77");
        REQUIRE(r.exit_code == 0);
        CHECK(file_hash(s.dir / "a" / "site_00.csv") == file_hash(s.dir / "d" / "site_00.csv"));
    }

    SUBCASE("malformed config exits 2 with a config diagnostic") {
        spit(s.dir / "bad.json", "{not json");
        auto r = run("gen --out " + (s / "x") + " --config " + (s / "bad.json"));
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("config error") != std::string::npos);
    }

    SUBCASE("unknown flag exits 2") {
        auto r = run("gen --out " + (s / "x") + " --bogus");
        CHECK(r.exit_code == 2);
    }

    SUBCASE("--help exits 0") {
        CHECK(run("--help").exit_code == 0);
        CHECK(run("score --help").exit_code == 0);
    }
}

TEST_CASE("plain scoring through the binary") {
    Scratch s;
    make_grid(s, "g");

    SUBCASE("identical datasets score near one half") {
        auto r = run("score --mode plain --data " + (s / "g") +
                     " --source site_00 --targets site_00 --seed 3 --out " + (s / "self.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json j = json::parse(slurp(s.dir / "self.json"));
        double v = j["scores"][0]["value"].get<double>();
        CHECK(v > 0.3);
        CHECK(v < 0.7);
    }

    SUBCASE("default target list covers every other site, sorted") {
        auto r = run("score --mode plain --data " + (s / "g") +
                     " --source site_01 --seed 3 --out " + (s / "all.json"));
        REQUIRE(r.exit_code == 0);
        json j = json::parse(slurp(s.dir / "all.json"));
        REQUIRE(j["scores"].size() == 3);
        CHECK(j["scores"][0]["target"] == "site_00");
        CHECK(j["scores"][1]["target"] == "site_02");
        CHECK(j["scores"][2]["target"] == "site_03");
        for (const auto& sc : j["scores"]) {
            CHECK(sc["source"] == "site_01");
            CHECK(sc["value"].get<double>() >= 0.0);
            CHECK(sc["value"].get<double>() <= 1.0);
        }
    }

    SUBCASE("reruns are byte-identical and the command can be replayed from provenance") {
        std::string args = "score --mode plain --method KL_XY --data " + (s / "g") +
                           " --source site_00 --targets site_01,site_02 --seed 9";
        REQUIRE(run(args + " --out " + (s / "s1.json")).exit_code == 0);
        REQUIRE(run(args + " --out " + (s / "s2.json")).exit_code == 0);
        CHECK(slurp(s.dir / "s1.json") == slurp(s.dir / "s2.json"));

        json prov = json::parse(slurp(s.dir / "s1.json"))["provenance"];
        const auto& p = prov["params"];
        std::string replay = "score --mode " + p["mode"].get<std::string>() + " --method " +
                             p["method"].get<std::string>() + " --data " +
                             p["data"].get<std::string>() + " --source " +
                             p["source"].get<std::string>() + " --targets " +
                             p["targets"].get<std::string>() + " --seed " +
                             p["seed"].get<std::string>() + " --k " + p["k"].get<std::string>();
        REQUIRE(run(replay + " --out " + (s / "s3.json")).exit_code == 0);
        CHECK(slurp(s.dir / "s1.json") == slurp(s.dir / "s3.json"));
    }

    SUBCASE("kde method runs and stays in range") {
        auto r = run("score --mode plain --method KDE_KL --data " + (s / "g") +
                     " --source site_00 --targets site_01 --seed 3 --out " + (s / "kde.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json j = json::parse(slurp(s.dir / "kde.json"));
        CHECK(j["scores"][0]["method"] == "KDE_KL");
    }

    SUBCASE("missing site exits 2, missing directory exits 4") {
        auto r1 = run("score --mode plain --data " + (s / "g") +
                      " --source nope --out " + (s / "x.json"));
        CHECK(r1.exit_code == 2);
        auto r2 = run("score --mode plain --data " + (s / "missing") +
                      " --source site_00 --out " + (s / "x.json"));
        CHECK(r2.exit_code == 4);
        CHECK(r2.output.find("data error") != std::string::npos);
    }

    SUBCASE("secure method names require secure mode, kde refuses secure mode") {
        auto r1 = run("score --mode plain --method SecureKL_XY --data " + (s / "g") +
                      " --source site_00 --out " + (s / "x.json"));
        CHECK(r1.exit_code == 2);
        auto r2 = run("score --mode secure --method KDE_KL --data " + (s / "g") +
                      " --source site_00 --out " + (s / "x.json"));
        CHECK(r2.exit_code == 2);
    }
}

TEST_CASE("secure scoring matches across deployments") {
    Scratch s;
    make_grid(s, "g");
    const std::string inproc = s / "inproc.json";
    auto r = run("score --mode secure --method KL_XY --data " + (s / "g") +
                 " --source site_00 --targets site_01 --seed 42 --out " + inproc);
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);

    SUBCASE("in-process runs are byte-identical") {
        REQUIRE(run("score --mode secure --method KL_XY --data " + (s / "g") +
                    " --source site_00 --targets site_01 --seed 42 --out " + (s / "again.json"))
                    .exit_code == 0);
        CHECK(slurp(inproc) == slurp(s.dir / "again.json"));
    }

    SUBCASE("two processes over TCP produce the same bytes as in-process") {
        int dealer_port = free_port_base();
        int party_port = free_port_base() + 1;
        std::string B = bin_path();
        std::ostringstream sc;
        sc << B << " dealer --listen " << dealer_port
           << " --seed 42 --source site_00 --target site_01 > " << (s / "dealer.log")
           << " 2>&1 &\n"
           << "sleep 0.3\n"
           << B << " score --mode secure --method KL_XY --data " << (s / "g") << "/site_00.csv"
           << " --role 0 --listen " << party_port << " --dealer 127.0.0.1:" << dealer_port
           << " --seed 42 --out " << (s / "p0.json") << " > " << (s / "p0.log") << " 2>&1 &\n"
           << "sleep 0.3\n"
           << B << " score --mode secure --method KL_XY --data " << (s / "g") << "/site_01.csv"
           << " --role 1 --peer 127.0.0.1:" << party_port << " --dealer 127.0.0.1:" << dealer_port
           << " --seed 42 --out " << (s / "p1.json") << " > " << (s / "p1.log") << " 2>&1\n"
           << "rc=$?\nwait\nexit $rc\n";
        spit(s.dir / "two.sh", sc.str());
        int rc = run_script("sh " + (s / "two.sh"));
        REQUIRE_MESSAGE(rc == 0, slurp(s.dir / "p0.log") << "\n" << slurp(s.dir / "p1.log")
                                                         << "\n" << slurp(s.dir / "dealer.log"));
        CHECK(slurp(s.dir / "p0.json") == slurp(s.dir / "p1.json"));
        CHECK(slurp(s.dir / "p0.json") == slurp(inproc));
    }

    SUBCASE("trace log captures the protocol as parseable records") {
        std::string prefix = "SECUREKL_LOG=" + (s / "trace.jsonl") + " ";
        std::string cmd = prefix + bin_path() + " score --mode secure --data " + (s / "g") +
                          " --source site_00 --targets site_01 --seed 42 --out " +
                          (s / "t.json") + " > /dev/null 2>&1";
        REQUIRE(run_script(cmd) == 0);
        for (const char* side : {".p0", ".p1"}) {
            std::ifstream f(s / ("trace.jsonl.site_00.site_01" + std::string(side)));
            REQUIRE(f.good());
            std::string line;
            int lines = 0;
            while (std::getline(f, line)) {
                if (line.empty()) continue;
                json rec;
                CHECK_NOTHROW(rec = json::parse(line));
                ++lines;
            }
            CHECK(lines > 10);
        }
    }
}

TEST_CASE("selection through the binary") {
    Scratch s;
    make_grid(s, "g");

    SUBCASE("strategies run end to end") {
        auto rb = run("select --data " + (s / "g") +
                      " --strategy blind --source site_00 --n 2 --seed 4 --out " +
                      (s / "blind.json"));
        REQUIRE_MESSAGE(rb.exit_code == 0, rb.output);
        json jb = json::parse(slurp(s.dir / "blind.json"));
        CHECK(jb["selected"].size() == 2);
        CHECK(jb["leakage"] == "zero");
        CHECK(jb["ranking"].empty());

        auto rd = run("select --data " + (s / "g") +
                      " --strategy demographic --source site_00 --n 1 --out " +
                      (s / "demo.json"));
        REQUIRE_MESSAGE(rd.exit_code == 0, rd.output);
        json jd = json::parse(slurp(s.dir / "demo.json"));
        CHECK(jd["leakage"] == "moderate");
        CHECK(jd["ranking"].size() == 3);

        auto rs = run("select --data " + (s / "g") +
                      " --strategy subset --source site_00 --n 1 --k 50 --seed 4 --out " +
                      (s / "subset.json"));
        REQUIRE_MESSAGE(rs.exit_code == 0, rs.output);
        json js = json::parse(slurp(s.dir / "subset.json"));
        CHECK(js["leakage"] == "high");
        CHECK(js["k_used"] == 50);
        CHECK(js["scores"].size() == 3);
    }

    SUBCASE("selection from a score file matches direct ranking") {
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_00 --seed 6 --out " + (s / "sc.json"))
                    .exit_code == 0);
        auto r = run("select --scores " + (s / "sc.json") + " --data " + (s / "g") +
                     " --n 1 --out " + (s / "sel.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json sel = json::parse(slurp(s.dir / "sel.json"));
        json sc = json::parse(slurp(s.dir / "sc.json"));
        std::string best;
        double best_v = 1e9;
        for (const auto& row : sc["scores"]) {
            double v = row["value"].get<double>();
            if (v < best_v) {
                best_v = v;
                best = row["target"].get<std::string>();
            }
        }
        REQUIRE(sel["selected"].size() == 1);
        CHECK(sel["selected"][0] == best);
        CHECK(sel["strategy"] == "subset");  // plaintext scores
    }

    SUBCASE("score file missing a candidate is a data error naming the site") {
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_00 --targets site_01,site_02 --seed 6 --out " +
                    (s / "partial.json"))
                    .exit_code == 0);
        auto r = run("select --scores " + (s / "partial.json") + " --data " + (s / "g") +
                     " --n 1 --out " + (s / "sel.json"));
        CHECK(r.exit_code == 4);
        CHECK(r.output.find("site_03") != std::string::npos);
    }

    SUBCASE("unknown strategy exits 2") {
        auto r = run("select --data " + (s / "g") +
                     " --strategy psychic --source site_00 --out " + (s / "x.json"));
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("evaluation and consistency through the binary") {
    Scratch s;
    make_grid(s, "g");

    SUBCASE("empty selection evaluates to exactly zero delta") {
        json sel;
        sel["source"] = "site_00";
        sel["strategy"] = "blind";
        sel["n"] = 0;
        sel["k"] = 0;
        sel["attribute"] = "gender";
        sel["seed"] = 0;
        sel["selected"] = json::array();
        spit(s.dir / "empty.json", sel.dump());
        auto r = run("evaluate --data " + (s / "g") + " --selection " + (s / "empty.json") +
                     " --folds 3 --repeats 2 --seed 5 --out " + (s / "ev.csv"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json out = json::parse(slurp(s.dir / "ev.json"));
        CHECK(out["outcomes"][0]["delta"].get<double>() == 0.0);
        CHECK(out["outcomes"][0]["auc_baseline"] == out["outcomes"][0]["auc_combined"]);
    }

    SUBCASE("csv schema, aggregate rows, and determinism") {
        REQUIRE(run("select --data " + (s / "g") +
                    " --strategy blind --source site_00 --n 1 --seed 4 --out " +
                    (s / "sel.json"))
                    .exit_code == 0);
        std::string args = "evaluate --data " + (s / "g") + " --selection " + (s / "sel.json") +
                           " --folds 3 --repeats 2 --seed 5 --out ";
        REQUIRE(run(args + (s / "e1.csv")).exit_code == 0);
        REQUIRE(run(args + (s / "e2.csv")).exit_code == 0);
        CHECK(slurp(s.dir / "e1.csv") == slurp(s.dir / "e2.csv"));
        CHECK(slurp(s.dir / "e1.json") == slurp(s.dir / "e2.json"));

        std::string csv = slurp(s.dir / "e1.csv");
        CHECK(csv.rfind("source,strategy,n,k,strategy_seed,selected,auc_baseline,auc_combined,"
                        "delta,folds,repeats,seed",
                        0) == 0);
        std::string summary = slurp(s.dir / "e1.summary.csv");
        CHECK(summary.rfind("strategy,n,mean_delta,std_delta,count", 0) == 0);
        CHECK(summary.find("blind,1,") != std::string::npos);
    }

    SUBCASE("consistency of a score set with itself is perfect") {
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_00 --seed 6 --out " + (s / "sc.json"))
                    .exit_code == 0);
        auto r = run("consistency --plain " + (s / "sc.json") + " --secure " + (s / "sc.json") +
                     " --out " + (s / "cons.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json rep = json::parse(slurp(s.dir / "cons.json"))["report"];
        CHECK(rep["mean_rho"].get<double>() == 1.0);
        std::string csv = slurp(s.dir / "cons.csv");
        CHECK(csv.rfind("source,rho,p_value,significant", 0) == 0);
    }

    SUBCASE("inverted scores give rho of minus one") {
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_00 --seed 6 --out " + (s / "sc.json"))
                    .exit_code == 0);
        json j = json::parse(slurp(s.dir / "sc.json"));
        json flipped = j;
        for (auto& row : flipped["scores"]) row["value"] = 1.0 - row["value"].get<double>();
        spit(s.dir / "flip.json", flipped.dump());
        auto r = run("consistency --plain " + (s / "sc.json") + " --secure " + (s / "flip.json") +
                     " --out " + (s / "cons.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.output);
        json rep = json::parse(slurp(s.dir / "cons.json"))["report"];
        CHECK(rep["mean_rho"].get<double>() == -1.0);
    }

    SUBCASE("disjoint score files are a data error") {
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_00 --targets site_01,site_02,site_03 --seed 6 --out " +
                    (s / "a.json"))
                    .exit_code == 0);
        REQUIRE(run("score --mode plain --data " + (s / "g") +
                    " --source site_01 --seed 6 --out " + (s / "b.json"))
                    .exit_code == 0);
        auto r = run("consistency --plain " + (s / "a.json") + " --secure " + (s / "b.json") +
                     " --out " + (s / "cons.json"));
        CHECK(r.exit_code == 4);
    }
}

TEST_SUITE_END();
