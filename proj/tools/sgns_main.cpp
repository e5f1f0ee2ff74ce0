// Command-line front end for the spectral stochastic Navier-Stokes lab.
//
//   sgns l1-holder   --config cfg [--set key=value ...] [--out DIR]
//   sgns besov-holder --config cfg [--set key=value ...] [--out DIR]
//   sgns diagnostics --config cfg [--set key=value ...] [--out DIR]
//
// SGNS_WORKERS overrides the configured worker count.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgns/experiments.hpp"

namespace {

sgns::ExperimentConfig load_config(const std::string& config_path,
                                   const std::vector<std::string>& overrides) {
    sgns::ExperimentConfig cfg = config_path.empty()
                                     ? sgns::ExperimentConfig{}
                                     : sgns::ExperimentConfig::from_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got: " + kv);
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void print_fit(const char* label, const sgns::HolderExperimentResult& res) {
    std::size_t used = 0;
    for (const auto& r : res.rows)
        if (r.used) ++used;
    std::printf("%s: slope=%.4f intercept=%.4f r2=%.4f noise_floor=%.4g used=%zu/%zu\n", label,
                res.fit.slope, res.fit.intercept, res.fit.r_squared, res.noise_floor, used,
                res.rows.size());
    std::printf("paths=%zu blowups=%zu grid: d=%d L=%.4g bins=%d\n", res.paths, res.blowups,
                res.grid.d, res.grid.box_l, res.grid.bins);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral Galerkin stochastic Navier-Stokes laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("--set", overrides, "override a config key (key=value)");
        sub->add_option("--out", out_dir, "output directory for CSV artifacts");
    };

    CLI::App* l1 = app.add_subcommand("l1-holder", "time-Hoelder exponent fit in L1");
    CLI::App* besov = app.add_subcommand("besov-holder", "time-Hoelder exponent fit in the Besov norm");
    CLI::App* diag = app.add_subcommand("diagnostics", "structural and statistical diagnostic battery");
    add_common(l1);
    add_common(besov);
    add_common(diag);

    CLI11_PARSE(app, argc, argv);

    try {
        const sgns::ExperimentConfig cfg = load_config(config_path, overrides);
        if (l1->parsed()) {
            const auto res = sgns::run_l1_holder(cfg, out_dir);
            print_fit("l1-holder", res);
        } else if (besov->parsed()) {
            const auto res = sgns::run_besov_holder(cfg, out_dir);
            print_fit("besov-holder", res);
        } else if (diag->parsed()) {
            const auto rows = sgns::run_diagnostics(cfg, out_dir);
            std::size_t passed = 0;
            for (const auto& r : rows) {
                std::printf("%-42s measured=%-13.6g tol=%-10.4g %s\n", r.property.c_str(),
                            r.measured, r.tolerance, r.pass ? "pass" : "FAIL");
                if (r.pass) ++passed;
            }
            std::printf("%zu/%zu diagnostics passed\n", passed, rows.size());
            if (passed != rows.size()) return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
