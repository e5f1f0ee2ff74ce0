#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgns/analytic_checks.hpp"
#include "sgns/density_lab.hpp"
#include "sgns/girsanov.hpp"
#include "sgns/integrator.hpp"

namespace sgns {

/// Counter-based derivation of per-trajectory stream seeds. Bijective in the
/// index for a fixed master seed, so derived seeds never collide.
std::uint64_t seed_split(std::uint64_t master_seed, std::uint64_t index);

/// Flat key=value experiment configuration with CLI overrides.
struct ExperimentConfig {
    int cutoff = 2;
    double nu = 1.0;
    double gamma = 1.0;
    double sigma0 = 1.0;
    std::vector<int> f_indices = {0, 1};
    std::string x0_kind = "zero";  // zero | single_mode | random
    int x0_mode = 0;
    double x0_amplitude = 1.0;  // coefficient (single_mode) or H-norm (random)
    double T = 1.0;
    double dt = 1e-3;
    std::size_t ensemble_size = 10000;
    std::vector<std::pair<double, double>> time_pairs;  // empty: generated from anchor/gaps
    double pair_anchor_s = 0.5;
    double gap_min = 0.0;  // 0: use 4*dt
    double gap_max = 0.5;
    int gap_count = 12;
    double alpha = 0.5;
    double beta = 0.5;
    int n_diff = 1;
    double box_l = 0.0;  // 0: six empirical standard deviations
    int bins = 128;      // analysis grid (per axis); Besov distances live here
    int l1_bins = 32;    // L1 distances on this nested coarser grid
    double mollify_eps = 0.0;  // 0: one cell width
    std::uint64_t master_seed = 42;
    int worker_count = 0;  // 0: hardware parallelism; env SGNS_WORKERS overrides
    bool bilinear = true;
    double n_threshold = 10.0;  // stopping budget for the weight diagnostics
    double diag_s = 0.25;
    double diag_t = 0.5;
    std::size_t diag_ensemble = 2000;
    double time_grid_min = 0.01;
    double time_grid_max = 1.0;
    int time_grid_count = 8;

    int dim_f() const { return int(f_indices.size()); }

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
    void apply_override(const std::string& key, const std::string& value);
    void validate() const;
    /// Pairs (s, s+gap) snapped to the dt grid, deduplicated, sorted by gap.
    std::vector<std::pair<double, double>> resolved_pairs() const;
    int resolved_workers() const;
    double resolved_gap_min() const { return gap_min > 0.0 ? gap_min : 4.0 * dt; }
};

/// Basis, convolution table, covariance and subspace assembled from a config.
struct LabSetup {
    FourierBasis basis;
    std::unique_ptr<ConvolutionTable> conv;
    CovarianceSpec cov;
    SubspaceF f_space;
    std::unique_ptr<GalerkinSystem> system;
    VelocityState x0;

    static LabSetup from_config(const ExperimentConfig& cfg);
};

/// Deterministic trajectory-parallel map: body(i) runs once per index, slots
/// are indexed, so results do not depend on worker scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

/// Per-time records of selected coefficients over an ensemble, stored in
/// trajectory-index order.
struct EnsembleRecord {
    std::vector<double> times;
    std::size_t paths = 0;
    int d = 0;
    std::vector<double> coords;        // [time][path][d]
    std::vector<double> log_g;         // [time][path] when weights tracked
    std::vector<double> raw_integral;  // [time][path] for reduced_v
    std::vector<double> sup_norm;      // [path]
    std::vector<char> blown;           // [path]
    std::size_t blowups = 0;

    /// Samples of the non-blown paths in [begin, end).
    ProjSamples samples_at(std::size_t time_idx) const;
    ProjSamples samples_at(std::size_t time_idx, std::size_t begin, std::size_t end) const;
    std::span<const double> log_g_at(std::size_t time_idx) const;
    std::span<const double> raw_integral_at(std::size_t time_idx) const;
};

struct RecordRequest {
    std::vector<double> times;
    std::vector<int> indices;  // coefficients to record; empty: the F indices
    bool weights = false;
    bool raw_integral = false;
};

/// Simulate one variant over the ensemble defined by the config.
EnsembleRecord run_ensemble(const LabSetup& lab, const ExperimentConfig& cfg,
                            const SystemVariant& variant, const RecordRequest& req);

/// Simulate several variants per path on one shared noise realization.
std::vector<EnsembleRecord> run_coupled_ensemble(const LabSetup& lab, const ExperimentConfig& cfg,
                                                 const std::vector<SystemVariant>& variants,
                                                 const RecordRequest& req);

struct PairRow {
    double s = 0.0, t = 0.0, gap = 0.0;
    double distance = 0.0;
    double stderr_ = 0.0;
    double floor_ = 0.0;
    bool used = false;
};

struct HolderExperimentResult {
    std::vector<PairRow> rows;
    bool fit_ok = false;
    HoelderFit fit;
    double noise_floor = 0.0;  // median across pairs
    GridSpec grid;             // grid the distances were measured on
    std::size_t blowups = 0;
    std::size_t paths = 0;
};

struct PairExperimentOutput {
    std::optional<HolderExperimentResult> l1;
    std::optional<HolderExperimentResult> besov;
};

/// Shared engine behind the two exponent experiments: one simulation of the
/// ensemble, histograms at the pair times, distances + noise floors + fits.
PairExperimentOutput run_pair_experiments(const LabSetup& lab, const ExperimentConfig& cfg,
                                          bool want_l1, bool want_besov,
                                          const std::string& out_dir);

HolderExperimentResult run_l1_holder(const ExperimentConfig& cfg, const std::string& out_dir);
HolderExperimentResult run_besov_holder(const ExperimentConfig& cfg, const std::string& out_dir);

struct TimedepRow {
    double t = 0.0;
    double besov_norm = 0.0;
};

struct TimedepResult {
    std::vector<TimedepRow> rows;
    double fitted_exponent = 0.0;  // slope of log norm against log t
};

/// Besov norm of the density of the F-projection on a log-spaced time grid,
/// from an already recorded ensemble.
TimedepResult timedep_norms(const EnsembleRecord& rec, const ExperimentConfig& cfg,
                            std::span<const std::size_t> time_indices, double alpha, int n);

struct TransferCheck {
    std::string name;
    double gap = 0.0;
    double stderr_combined = 0.0;
};

struct TruncationPoint {
    double n = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
    double p_tau = 0.0;
    double bound = 0.0;
};

struct GirsanovBatteryOptions {
    bool truncation_grid = false;  // adds one extra chain per budget point
};

/// All weight-based statistics from one coupled ensemble: the full chain, the
/// drift-reduced chain carrying the weight, and the truncated chain, driven
/// by the same noise realizations.
struct GirsanovBattery {
    std::size_t paths = 0;
    MeanStderr martingale;              // E[G_t]
    double p_tau_at_n = 0.0;            // P[stopping integral at t >= n]
    std::vector<TransferCheck> transfer;
    LogMomentReport logm_small;         // gap delta
    LogMomentReport logm_large;         // gap 4 delta
    double log_ratio = 0.0;             // lhs(delta) / lhs(4 delta)
    IncrementReport inc_const;          // X = 1
    IncrementReport inc_sign;           // X = sign(G_t - G_s)
    std::vector<double> stopping_n;
    std::vector<double> stopping_p;
    MarkovRepReport markov;
    std::vector<TruncationPoint> truncation;
    double numgirsanov_exponent = 0.0;
    std::vector<double> numg_gaps;
    std::vector<double> numg_values;
};

GirsanovBattery run_girsanov_battery(const LabSetup& lab, const ExperimentConfig& cfg,
                                     const GirsanovBatteryOptions& opts = {});

struct DiagnosticRow {
    std::string property;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// The full structural + statistical diagnostic battery; one row per
/// property. Failures are reported, not thrown.
std::vector<DiagnosticRow> run_diagnostics(const ExperimentConfig& cfg, const std::string& out_dir);

void write_distances_csv(const std::string& path, std::span<const PairRow> rows);
void write_fit_csv(const std::string& path, const HoelderFit& fit, double noise_floor);
void write_diagnostics_csv(const std::string& path, std::span<const DiagnosticRow> rows);

}  // namespace sgns
