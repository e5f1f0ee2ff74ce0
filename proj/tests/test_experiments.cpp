#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "doctest.h"
#include "sgns/experiments.hpp"

using namespace sgns;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.cutoff = 1;
    cfg.dt = 2e-3;
    cfg.T = 0.35;
    cfg.ensemble_size = 2000;
    cfg.pair_anchor_s = 0.1;
    cfg.gap_min = 0.016;
    cfg.gap_max = 0.25;
    cfg.gap_count = 7;
    cfg.bins = 32;
    cfg.l1_bins = 16;
    cfg.master_seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("seed splitting is deterministic and collision free") {
    CHECK(seed_split(42, 0) == seed_split(42, 0));
    CHECK(seed_split(42, 0) != seed_split(42, 1));
    CHECK(seed_split(42, 0) != seed_split(43, 0));

    std::vector<std::uint64_t> seeds(1000000);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = seed_split(42, i);
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("config file parsing and overrides") {
    const std::string path = "/tmp/sgns_test_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "cutoff = 2\n";
        out << "nu = 0.5\n";
        out << "f_indices = 0, 1\n";
        out << "ensemble_size = 1234   # trailing comment\n";
        out << "time_pairs = 0.1:0.2, 0.1:0.3\n";
        out << "bilinear = off\n";
        out << "T = 0.4\n";
    }
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    CHECK(cfg.cutoff == 2);
    CHECK(cfg.nu == doctest::Approx(0.5));
    CHECK(cfg.ensemble_size == 1234);
    CHECK(cfg.time_pairs.size() == 2);
    CHECK(!cfg.bilinear);

    cfg.apply_override("nu", "2.0");
    CHECK(cfg.nu == doctest::Approx(2.0));
    CHECK_THROWS(cfg.apply_override("no_such_key", "1"));

    ExperimentConfig bad;
    bad.alpha = 1.5;
    CHECK_THROWS(bad.validate());
    ExperimentConfig bad2;
    bad2.l1_bins = 33;
    CHECK_THROWS(bad2.validate());
    ExperimentConfig bad3;
    bad3.x0_kind = "bogus";
    CHECK_THROWS(bad3.validate());
}

TEST_CASE("resolved pairs snap to the time grid") {
    ExperimentConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 1.0;
    cfg.pair_anchor_s = 0.5;
    cfg.gap_min = 0.0;  // 4 dt
    cfg.gap_max = 0.5;
    cfg.gap_count = 10;
    auto pairs = cfg.resolved_pairs();
    CHECK(pairs.size() >= 8);  // snapping may merge a couple of gaps
    for (const auto& [s, t] : pairs) {
        CHECK(std::abs(s / cfg.dt - std::round(s / cfg.dt)) < 1e-9);
        CHECK(std::abs(t / cfg.dt - std::round(t / cfg.dt)) < 1e-9);
        CHECK(t > s);
    }
    CHECK(pairs.front().second - pairs.front().first == doctest::Approx(4e-3));
    CHECK(pairs.back().second - pairs.back().first == doctest::Approx(0.5));

    ExperimentConfig ex;
    ex.time_pairs = {{0.2, 0.1}};
    CHECK_THROWS(ex.validate());
}

TEST_CASE("initial states from the config") {
    ExperimentConfig cfg = tiny_config();
    cfg.x0_kind = "zero";
    CHECK(norm_h(LabSetup::from_config(cfg).x0) == 0.0);

    cfg.x0_kind = "single_mode";
    cfg.x0_mode = 3;
    cfg.x0_amplitude = 0.7;
    LabSetup single = LabSetup::from_config(cfg);
    CHECK(single.x0.c[3] == doctest::Approx(0.7));
    CHECK(norm_h(single.x0) == doctest::Approx(0.7));

    cfg.x0_kind = "random";
    cfg.x0_amplitude = 1.3;
    LabSetup r1 = LabSetup::from_config(cfg);
    LabSetup r2 = LabSetup::from_config(cfg);
    CHECK(norm_h(r1.x0) == doctest::Approx(1.3).epsilon(1e-12));
    for (std::size_t i = 0; i < r1.x0.size(); ++i) CHECK(r1.x0.c[i] == r2.x0.c[i]);
    cfg.master_seed = 8;
    LabSetup r3 = LabSetup::from_config(cfg);
    CHECK(norm_h(r3.x0) == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(r3.x0.c[0] != r1.x0.c[0]);
}

TEST_CASE("ensembles are reproducible and worker-count independent") {
    ExperimentConfig cfg = tiny_config();
    cfg.ensemble_size = 64;
    LabSetup lab = LabSetup::from_config(cfg);
    RecordRequest req;
    req.times = {0.1, 0.2};

    cfg.worker_count = 1;
    EnsembleRecord a = run_ensemble(lab, cfg, SystemVariant::full_u(), req);
    cfg.worker_count = 4;
    EnsembleRecord b = run_ensemble(lab, cfg, SystemVariant::full_u(), req);
    cfg.worker_count = 8;
    EnsembleRecord c = run_ensemble(lab, cfg, SystemVariant::full_u(), req);
    REQUIRE(a.coords.size() == b.coords.size());
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        CHECK(a.coords[i] == b.coords[i]);
        CHECK(a.coords[i] == c.coords[i]);
    }
}

TEST_CASE("csv artifacts are byte-identical across worker counts") {
    namespace fs = std::filesystem;
    ExperimentConfig cfg = tiny_config();
    std::vector<std::string> contents;
    for (int workers : {1, 4, 8}) {
        cfg.worker_count = workers;
        const std::string dir = "/tmp/sgns_det_" + std::to_string(workers);
        fs::remove_all(dir);
        run_l1_holder(cfg, dir);
        contents.push_back(read_file(dir + "/distances.csv") + read_file(dir + "/fit.csv"));
    }
    CHECK(contents[0] == contents[1]);
    CHECK(contents[0] == contents[2]);
    CHECK(contents[0].find("s,t,gap,distance,stderr,used") == 0);
}

TEST_CASE("paired experiments share trajectories and dominate in norm") {
    ExperimentConfig cfg = tiny_config();
    cfg.ensemble_size = 3000;
    LabSetup lab = LabSetup::from_config(cfg);
    cfg.alpha = 0.2;
    cfg.beta = 0.5;
    PairExperimentOutput out = run_pair_experiments(lab, cfg, true, true, "");
    REQUIRE(out.l1.has_value());
    REQUIRE(out.besov.has_value());
    REQUIRE(out.l1->rows.size() == out.besov->rows.size());
    for (std::size_t i = 0; i < out.l1->rows.size(); ++i) {
        CHECK(out.l1->rows[i].gap == out.besov->rows[i].gap);
        CHECK(out.l1->rows[i].distance <= out.besov->rows[i].distance);
    }
    CHECK(out.l1->grid.bins == cfg.l1_bins);
    CHECK(out.besov->grid.bins == cfg.bins);
}

TEST_CASE("besov experiment validates the exponent budget") {
    ExperimentConfig cfg = tiny_config();
    cfg.alpha = 0.5;
    cfg.beta = 0.6;
    CHECK_THROWS(run_besov_holder(cfg, ""));
}

TEST_CASE("ensemble aborts when too many trajectories blow up") {
    ExperimentConfig cfg = tiny_config();
    cfg.ensemble_size = 30;
    cfg.x0_kind = "random";
    cfg.x0_amplitude = 5e5;  // far beyond the guard
    CHECK_THROWS(run_l1_holder(cfg, ""));
}

TEST_CASE("doubling the initial norm leaves the fitted exponent in place") {
    ExperimentConfig cfg = tiny_config();
    cfg.ensemble_size = 4000;
    cfg.x0_kind = "random";
    cfg.x0_amplitude = 0.25;
    HolderExperimentResult r1 = run_l1_holder(cfg, "");
    cfg.x0_amplitude = 0.5;
    cfg.master_seed = 7;  // same streams, scaled start
    HolderExperimentResult r2 = run_l1_holder(cfg, "");

    auto slope_se = [](const HolderExperimentResult& r) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            if (r.rows[i].used) {
                lx.push_back(std::log(r.rows[i].gap));
                ly.push_back(std::log(r.rows[i].distance));
            }
        double mx = 0.0;
        for (double v : lx) mx += v;
        mx /= double(lx.size());
        double sxx = 0.0, ss_res = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) sxx += (lx[i] - mx) * (lx[i] - mx);
        for (std::size_t i = 0; i < lx.size(); ++i) {
            const double fit = r.fit.intercept + r.fit.slope * lx[i];
            ss_res += (ly[i] - fit) * (ly[i] - fit);
        }
        const double dof = std::max(1.0, double(lx.size()) - 2.0);
        return std::sqrt(ss_res / dof / sxx);
    };
    const double tol = 3.0 * (slope_se(r1) + slope_se(r2)) + 0.05;
    CHECK(std::abs(r1.fit.slope - r2.fit.slope) <= tol);
}

TEST_CASE("small-time norm growth stays below the stated rate") {
    ExperimentConfig cfg = tiny_config();
    cfg.ensemble_size = 4000;
    cfg.bins = 64;
    RecordRequest req;
    std::vector<std::size_t> idx;
    for (double t : {0.02, 0.05, 0.1, 0.2, 0.35}) {
        idx.push_back(req.times.size());
        req.times.push_back(t);
    }
    LabSetup lab = LabSetup::from_config(cfg);
    EnsembleRecord rec = run_ensemble(lab, cfg, SystemVariant::full_u(), req);
    TimedepResult td = timedep_norms(rec, cfg, idx, 0.5, 1);
    REQUIRE(td.rows.size() == 5);
    for (const auto& row : td.rows) CHECK(row.besov_norm >= 1.0);  // mass term alone is 1
    CHECK(td.fitted_exponent >= -0.7);
}

TEST_CASE("diagnostics csv is deterministic") {
    namespace fs = std::filesystem;
    ExperimentConfig cfg = tiny_config();
    cfg.diag_ensemble = 400;
    cfg.diag_s = 0.1;
    cfg.diag_t = 0.3;
    cfg.time_grid_min = 0.05;
    cfg.time_grid_max = 0.3;
    cfg.time_grid_count = 4;
    fs::remove_all("/tmp/sgns_diag_a");
    fs::remove_all("/tmp/sgns_diag_b");
    auto rows_a = run_diagnostics(cfg, "/tmp/sgns_diag_a");
    auto rows_b = run_diagnostics(cfg, "/tmp/sgns_diag_b");
    CHECK(!rows_a.empty());
    CHECK(read_file("/tmp/sgns_diag_a/diagnostics.csv") ==
          read_file("/tmp/sgns_diag_b/diagnostics.csv"));
    // deterministic identities must pass even at this tiny scale
    for (const auto& r : rows_a) {
        if (r.property == "trilinear_antisymmetry_rel" || r.property == "leray_idempotent" ||
            r.property == "pseudo_inverse_roundtrip" || r.property == "trace_bookkeeping" ||
            r.property == "elementary_inequality_violations" ||
            r.property == "discrete_ibp_gap_rel" || r.property == "seed_split_distinct_1e6") {
            INFO(r.property);
            CHECK(r.pass);
        }
    }
}
