#include "sgns/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "sgns/csv.hpp"

namespace sgns {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kX0StreamIndex = 0xFFFFFFFFFFFFFFFFull;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

}  // namespace

std::uint64_t seed_split(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ull);
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config: expected key=value: " + line);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return from_map(kv);
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    for (const auto& [k, v] : kv) cfg.apply_override(k, v);
    cfg.validate();
    return cfg;
}

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoi(value); };
    auto as_size = [&] { return std::size_t(std::stoull(value)); };
    auto as_bool = [&] {
        if (value == "on" || value == "true" || value == "1") return true;
        if (value == "off" || value == "false" || value == "0") return false;
        throw std::runtime_error("config: bad bool for " + key + ": " + value);
    };

    if (key == "cutoff") cutoff = as_int();
    else if (key == "nu") nu = as_double();
    else if (key == "gamma") gamma = as_double();
    else if (key == "sigma0") sigma0 = as_double();
    else if (key == "f_indices") {
        f_indices.clear();
        for (const auto& tok : split(value, ',')) f_indices.push_back(std::stoi(tok));
    } else if (key == "x0_kind") x0_kind = value;
    else if (key == "x0_mode") x0_mode = as_int();
    else if (key == "x0_amplitude") x0_amplitude = as_double();
    else if (key == "T") T = as_double();
    else if (key == "dt") dt = as_double();
    else if (key == "ensemble_size") ensemble_size = as_size();
    else if (key == "time_pairs") {
        time_pairs.clear();
        for (const auto& tok : split(value, ',')) {
            const auto st = split(tok, ':');
            if (st.size() != 2) throw std::runtime_error("config: bad time pair: " + tok);
            time_pairs.emplace_back(std::stod(st[0]), std::stod(st[1]));
        }
    } else if (key == "pair_anchor_s") pair_anchor_s = as_double();
    else if (key == "gap_min") gap_min = as_double();
    else if (key == "gap_max") gap_max = as_double();
    else if (key == "gap_count") gap_count = as_int();
    else if (key == "alpha") alpha = as_double();
    else if (key == "beta") beta = as_double();
    else if (key == "n_diff") n_diff = as_int();
    else if (key == "box_l") box_l = as_double();
    else if (key == "bins") bins = as_int();
    else if (key == "l1_bins") l1_bins = as_int();
    else if (key == "mollify_eps") mollify_eps = as_double();
    else if (key == "master_seed") master_seed = std::stoull(value);
    else if (key == "worker_count") worker_count = as_int();
    else if (key == "bilinear") bilinear = as_bool();
    else if (key == "n_threshold") n_threshold = as_double();
    else if (key == "diag_s") diag_s = as_double();
    else if (key == "diag_t") diag_t = as_double();
    else if (key == "diag_ensemble") diag_ensemble = as_size();
    else if (key == "time_grid_min") time_grid_min = as_double();
    else if (key == "time_grid_max") time_grid_max = as_double();
    else if (key == "time_grid_count") time_grid_count = as_int();
    else throw std::runtime_error("config: unknown key: " + key);
}

void ExperimentConfig::validate() const {
    if (cutoff < 1) throw std::runtime_error("config: cutoff must be >= 1");
    if (nu < 0.0) throw std::runtime_error("config: nu must be >= 0");
    if (sigma0 <= 0.0) throw std::runtime_error("config: sigma0 must be positive");
    if (dt <= 0.0 || T <= 0.0) throw std::runtime_error("config: T, dt must be positive");
    if (f_indices.empty()) throw std::runtime_error("config: f_indices must be nonempty");
    if (dim_f() > 2) throw std::runtime_error("config: density estimation supports d <= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::runtime_error("config: alpha must be in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw std::runtime_error("config: beta must be in (0,1)");
    if (n_diff < 1) throw std::runtime_error("config: n_diff must be >= 1");
    if (bins < 2 || l1_bins < 2 || bins % l1_bins != 0)
        throw std::runtime_error("config: l1_bins must divide bins");
    if (x0_kind != "zero" && x0_kind != "single_mode" && x0_kind != "random")
        throw std::runtime_error("config: x0_kind must be zero|single_mode|random");
    for (const auto& [s, t] : resolved_pairs()) {
        if (!(s > 0.0 && s < t && t <= T + 1e-12))
            throw std::runtime_error("config: time pairs must satisfy 0 < s < t <= T");
    }
}

std::vector<std::pair<double, double>> ExperimentConfig::resolved_pairs() const {
    std::vector<std::pair<double, double>> pairs;
    auto snap = [&](double t) { return std::round(t / dt) * dt; };
    if (!time_pairs.empty()) {
        for (auto [s, t] : time_pairs) pairs.emplace_back(snap(s), snap(t));
    } else {
        const double lo = resolved_gap_min();
        const double hi = gap_max;
        const double s = snap(pair_anchor_s);
        for (int i = 0; i < gap_count; ++i) {
            const double f = gap_count == 1 ? 0.0 : double(i) / double(gap_count - 1);
            const double gap = snap(lo * std::pow(hi / lo, f));
            const double t = snap(s + gap);
            if (t > s) pairs.emplace_back(s, t);
        }
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.second - a.first < b.second - b.first; });
    pairs.erase(std::unique(pairs.begin(), pairs.end(),
                            [](const auto& a, const auto& b) {
                                return std::abs(a.first - b.first) < 1e-12 &&
                                       std::abs(a.second - b.second) < 1e-12;
                            }),
                pairs.end());
    return pairs;
}

int ExperimentConfig::resolved_workers() const {
    if (const char* env = std::getenv("SGNS_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    if (worker_count >= 1) return worker_count;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

LabSetup LabSetup::from_config(const ExperimentConfig& cfg) {
    LabSetup lab;
    lab.basis = FourierBasis::build(cfg.cutoff);
    lab.conv = std::make_unique<ConvolutionTable>(lab.basis);
    lab.cov = CovarianceSpec::isotropic_decay(lab.basis, cfg.sigma0, cfg.gamma);
    lab.f_space = make_subspace(lab.cov, cfg.f_indices);
    lab.system = std::make_unique<GalerkinSystem>(lab.basis, *lab.conv, lab.cov, lab.f_space,
                                                  cfg.nu, cfg.bilinear);
    lab.x0 = lab.basis.zero_state();
    if (cfg.x0_kind == "single_mode") {
        if (cfg.x0_mode < 0 || std::size_t(cfg.x0_mode) >= lab.basis.size())
            throw std::runtime_error("config: x0_mode out of range");
        lab.x0.c[std::size_t(cfg.x0_mode)] = cfg.x0_amplitude;
    } else if (cfg.x0_kind == "random") {
        std::mt19937_64 rng(seed_split(cfg.master_seed, kX0StreamIndex));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& c : lab.x0.c) c = normal(rng);
        const double n = norm_h(lab.x0);
        for (double& c : lab.x0.c) c *= cfg.x0_amplitude / n;
    }
    return lab;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    workers = std::max(1, std::min<int>(workers, int(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors;
    errors.resize(std::size_t(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    body(i);
                }
            } catch (...) {
                errors[std::size_t(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ProjSamples EnsembleRecord::samples_at(std::size_t time_idx) const {
    return samples_at(time_idx, 0, paths);
}

ProjSamples EnsembleRecord::samples_at(std::size_t time_idx, std::size_t begin,
                                       std::size_t end) const {
    ProjSamples s;
    s.d = d;
    s.xy.reserve((end - begin) * std::size_t(d));
    const double* base = coords.data() + time_idx * paths * std::size_t(d);
    for (std::size_t p = begin; p < end; ++p) {
        if (!blown.empty() && blown[p]) continue;
        for (int a = 0; a < d; ++a) s.xy.push_back(base[p * std::size_t(d) + std::size_t(a)]);
        ++s.count;
    }
    return s;
}

std::span<const double> EnsembleRecord::log_g_at(std::size_t time_idx) const {
    return {log_g.data() + time_idx * paths, paths};
}

std::span<const double> EnsembleRecord::raw_integral_at(std::size_t time_idx) const {
    return {raw_integral.data() + time_idx * paths, paths};
}

namespace {

struct SlotPlan {
    std::vector<std::pair<std::size_t, std::size_t>> step_slots;  // (step index, time slot)

    SlotPlan(std::span<const double> times, double dt, double T) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            const auto k = std::size_t(std::llround(times[i] / dt));
            if (std::abs(double(k) * dt - times[i]) > 1e-9 * std::max(1.0, times[i]))
                throw std::invalid_argument("ensemble: sample time off the dt grid");
            if (times[i] > T + 1e-12) throw std::invalid_argument("ensemble: sample time beyond T");
            step_slots.emplace_back(k, i);
        }
        std::sort(step_slots.begin(), step_slots.end());
    }
};

struct SlotRecorder final : StepVisitor {
    EnsembleRecord* rec = nullptr;
    const SlotPlan* plan = nullptr;
    const std::vector<int>* indices = nullptr;
    std::size_t path = 0;
    std::size_t cursor = 0;

    void visit(std::size_t step, double, const VelocityState& x, const GirsanovWeight* w,
               double raw) override {
        while (cursor < plan->step_slots.size() && plan->step_slots[cursor].first == step) {
            const std::size_t slot = plan->step_slots[cursor].second;
            const std::size_t d = indices->size();
            double* out = rec->coords.data() + (slot * rec->paths + path) * d;
            for (std::size_t a = 0; a < d; ++a) out[a] = x.c[std::size_t((*indices)[a])];
            if (!rec->log_g.empty()) rec->log_g[slot * rec->paths + path] = w ? w->log_g : 0.0;
            if (!rec->raw_integral.empty()) rec->raw_integral[slot * rec->paths + path] = raw;
            ++cursor;
        }
    }
};

EnsembleRecord make_record(const RecordRequest& req, const ExperimentConfig& cfg, int d) {
    EnsembleRecord rec;
    rec.times = req.times;
    rec.paths = cfg.ensemble_size;
    rec.d = d;
    rec.coords.assign(req.times.size() * rec.paths * std::size_t(d), 0.0);
    if (req.weights) rec.log_g.assign(req.times.size() * rec.paths, 0.0);
    if (req.raw_integral) rec.raw_integral.assign(req.times.size() * rec.paths, 0.0);
    rec.sup_norm.assign(rec.paths, 0.0);
    rec.blown.assign(rec.paths, 0);
    return rec;
}

}  // namespace

EnsembleRecord run_ensemble(const LabSetup& lab, const ExperimentConfig& cfg,
                            const SystemVariant& variant, const RecordRequest& req) {
    const std::vector<int> indices = req.indices.empty() ? cfg.f_indices : req.indices;
    EnsembleRecord rec = make_record(req, cfg, int(indices.size()));
    const SlotPlan plan(req.times, cfg.dt, cfg.T);
    std::atomic<std::size_t> blowups{0};

    IntegratorOptions opts;
    if (req.weights && variant.tag == SystemVariant::Tag::ReducedV)
        opts.track_weight_n = cfg.n_threshold;

    parallel_for(cfg.ensemble_size, cfg.resolved_workers(), [&](std::size_t i) {
        GaussianNoise noise(lab.cov, cfg.dt, seed_split(cfg.master_seed, i));
        SlotRecorder recorder;
        recorder.rec = &rec;
        recorder.plan = &plan;
        recorder.indices = &indices;
        recorder.path = i;
        IntegrateResult res = lab.system->integrate(lab.x0, variant, cfg.T, cfg.dt, noise,
                                                    &recorder, opts);
        rec.sup_norm[i] = res.sup_norm_h;
        if (res.blown_up) {
            rec.blown[i] = 1;
            blowups.fetch_add(1);
        }
    });
    rec.blowups = blowups.load();
    return rec;
}

std::vector<EnsembleRecord> run_coupled_ensemble(const LabSetup& lab, const ExperimentConfig& cfg,
                                                 const std::vector<SystemVariant>& variants,
                                                 const RecordRequest& req) {
    const std::vector<int> indices = req.indices.empty() ? cfg.f_indices : req.indices;
    std::vector<EnsembleRecord> recs;
    for (std::size_t v = 0; v < variants.size(); ++v)
        recs.push_back(make_record(req, cfg, int(indices.size())));
    const SlotPlan plan(req.times, cfg.dt, cfg.T);
    std::vector<std::atomic<std::size_t>> blowups(variants.size());

    const std::size_t steps = GalerkinSystem::step_count(cfg.T, cfg.dt);

    parallel_for(cfg.ensemble_size, cfg.resolved_workers(), [&](std::size_t i) {
        std::mt19937_64 rng(seed_split(cfg.master_seed, i));
        NoisePath path = NoisePath::sample(lab.cov, steps, cfg.dt, rng);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            IntegratorOptions opts;
            if (req.weights && variants[v].tag == SystemVariant::Tag::ReducedV)
                opts.track_weight_n = cfg.n_threshold;
            PathNoise noise(path);
            SlotRecorder recorder;
            recorder.rec = &recs[v];
            recorder.plan = &plan;
            recorder.indices = &indices;
            recorder.path = i;
            IntegrateResult res = lab.system->integrate(lab.x0, variants[v], cfg.T, cfg.dt, noise,
                                                        &recorder, opts);
            recs[v].sup_norm[i] = res.sup_norm_h;
            if (res.blown_up) {
                recs[v].blown[i] = 1;
                blowups[v].fetch_add(1);
            }
        }
    });
    for (std::size_t v = 0; v < variants.size(); ++v) recs[v].blowups = blowups[v].load();
    return recs;
}

namespace {

// Deterministic per-axis mean and standard deviation pooled over several
// recorded times.
void pooled_moments(const EnsembleRecord& rec, std::span<const std::size_t> time_indices,
                    std::vector<double>& mean, std::vector<double>& sd) {
    const int d = rec.d;
    mean.assign(std::size_t(d), 0.0);
    sd.assign(std::size_t(d), 0.0);
    std::size_t n = 0;
    for (std::size_t ti : time_indices) {
        const double* base = rec.coords.data() + ti * rec.paths * std::size_t(d);
        for (std::size_t p = 0; p < rec.paths; ++p) {
            if (!rec.blown.empty() && rec.blown[p]) continue;
            for (int a = 0; a < d; ++a) mean[std::size_t(a)] += base[p * std::size_t(d) + std::size_t(a)];
            ++n;
        }
    }
    for (int a = 0; a < d; ++a) mean[std::size_t(a)] /= double(n);
    for (std::size_t ti : time_indices) {
        const double* base = rec.coords.data() + ti * rec.paths * std::size_t(d);
        for (std::size_t p = 0; p < rec.paths; ++p) {
            if (!rec.blown.empty() && rec.blown[p]) continue;
            for (int a = 0; a < d; ++a) {
                const double dev = base[p * std::size_t(d) + std::size_t(a)] - mean[std::size_t(a)];
                sd[std::size_t(a)] += dev * dev;
            }
        }
    }
    for (int a = 0; a < d; ++a) sd[std::size_t(a)] = std::sqrt(sd[std::size_t(a)] / double(n - 1));
}

double auto_box(const ExperimentConfig& cfg, const EnsembleRecord& rec,
                std::span<const std::size_t> time_indices) {
    if (cfg.box_l > 0.0) return cfg.box_l;
    std::vector<double> mean, sd;
    pooled_moments(rec, time_indices, mean, sd);
    double l = 0.0;
    for (std::size_t a = 0; a < mean.size(); ++a)
        l = std::max(l, std::abs(mean[a]) + 6.0 * sd[a]);
    return l;
}

struct PairAnalysis {
    std::vector<PairRow> rows;
    double floor_median = 0.0;
};

// distance_fn computed between two density estimates on the shared fine grid
PairAnalysis analyze_pairs(const std::vector<std::pair<double, double>>& pairs,
                           const std::vector<double>& times,
                           const std::vector<DensityEstimate>& full,
                           const std::vector<DensityEstimate>& half_a,
                           const std::vector<DensityEstimate>& half_b,
                           const std::function<double(const DensityEstimate&,
                                                      const DensityEstimate&)>& distance_fn) {
    auto slot_of = [&](double t) {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) < 1e-12) return i;
        throw std::logic_error("analyze_pairs: time not recorded");
    };
    PairAnalysis out;
    std::vector<double> floors;
    for (const auto& [s, t] : pairs) {
        const std::size_t is = slot_of(s), it = slot_of(t);
        PairRow row;
        row.s = s;
        row.t = t;
        row.gap = t - s;
        row.distance = distance_fn(full[is], full[it]);
        const double da = distance_fn(half_a[is], half_a[it]);
        const double db = distance_fn(half_b[is], half_b[it]);
        row.stderr_ = 0.5 * std::abs(da - db);
        row.floor_ = distance_fn(half_a[is], half_b[is]);
        floors.push_back(row.floor_);
        out.rows.push_back(row);
    }
    out.floor_median = median_of(floors);
    return out;
}

// fits the exponent and writes the artifacts; on fit refusal the distance
// table is still written before the error propagates
HolderExperimentResult finish_experiment(const PairAnalysis& analysis, const GridSpec& grid,
                                         std::size_t blowups, std::size_t paths,
                                         const std::string& dir) {
    HolderExperimentResult res;
    res.rows = analysis.rows;
    res.noise_floor = analysis.floor_median;
    res.grid = grid;
    res.blowups = blowups;
    res.paths = paths;
    std::vector<double> gaps, dists;
    for (const auto& r : analysis.rows) {
        gaps.push_back(r.gap);
        dists.push_back(r.distance);
    }
    try {
        res.fit = hoelder_fit(gaps, dists, analysis.floor_median);
        res.fit_ok = true;
        for (std::size_t i = 0; i < res.rows.size(); ++i) res.rows[i].used = res.fit.used[i] != 0;
    } catch (const std::exception&) {
        res.fit_ok = false;
    }
    if (!dir.empty()) {
        write_distances_csv(dir + "/distances.csv", res.rows);
        if (res.fit_ok) write_fit_csv(dir + "/fit.csv", res.fit, res.noise_floor);
    }
    return res;
}

}  // namespace

PairExperimentOutput run_pair_experiments(const LabSetup& lab, const ExperimentConfig& cfg,
                                          bool want_l1, bool want_besov,
                                          const std::string& out_dir) {
    if (want_besov && !(cfg.alpha + cfg.beta < 1.0))
        throw std::runtime_error("besov experiment requires alpha + beta < 1");

    const auto pairs = cfg.resolved_pairs();
    if (pairs.empty()) throw std::runtime_error("no time pairs configured");

    std::vector<double> times;
    for (const auto& [s, t] : pairs) {
        times.push_back(s);
        times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                times.end());

    RecordRequest req;
    req.times = times;
    EnsembleRecord rec = run_ensemble(lab, cfg, SystemVariant::full_u(), req);
    if (double(rec.blowups) > 0.01 * double(rec.paths))
        throw std::runtime_error("ensemble aborted: more than 1% of trajectories blew up");

    std::vector<std::size_t> all_slots(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) all_slots[i] = i;
    const double box = auto_box(cfg, rec, all_slots);

    const std::size_t half = rec.paths / 2;
    std::vector<DensityEstimate> fine_full, fine_a, fine_b;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        fine_full.push_back(estimate_density(rec.samples_at(ti), box, cfg.bins));
        fine_a.push_back(estimate_density(rec.samples_at(ti, 0, half), box, cfg.bins));
        fine_b.push_back(estimate_density(rec.samples_at(ti, half, rec.paths), box, cfg.bins));
    }

    PairExperimentOutput out;
    namespace fs = std::filesystem;
    // when both experiments run, each keeps its own artifact directory
    const std::string l1_dir =
        out_dir.empty() ? out_dir : (want_besov && want_l1 ? out_dir + "/l1" : out_dir);
    const std::string besov_dir =
        out_dir.empty() ? out_dir : (want_besov && want_l1 ? out_dir + "/besov" : out_dir);
    if (!l1_dir.empty() && want_l1) fs::create_directories(l1_dir);
    if (!besov_dir.empty() && want_besov) fs::create_directories(besov_dir);

    if (want_l1) {
        const int factor = cfg.bins / cfg.l1_bins;
        std::vector<DensityEstimate> cf, ca, cb;
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            cf.push_back(coarsen(fine_full[ti], factor));
            ca.push_back(coarsen(fine_a[ti], factor));
            cb.push_back(coarsen(fine_b[ti], factor));
        }
        auto analysis = analyze_pairs(pairs, times, cf, ca, cb,
                                      [](const DensityEstimate& f, const DensityEstimate& g) {
                                          return l1_distance(f, g);
                                      });
        out.l1 = finish_experiment(analysis, cf[0].fn.grid, rec.blowups, rec.paths, l1_dir);
    }

    if (want_besov) {
        GridSpec fine_grid{cfg.dim_f(), box, cfg.bins};
        // cell-scale smoothing: the bump vanishes at its own radius, so the
        // radius must exceed one cell width to couple neighboring cells
        const double eps =
            cfg.mollify_eps > 0.0 ? cfg.mollify_eps : 4.0 * fine_grid.cell_width();
        std::vector<DensityEstimate> mf, ma, mb;
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            mf.push_back(mollify(fine_full[ti], eps));
            ma.push_back(mollify(fine_a[ti], eps));
            mb.push_back(mollify(fine_b[ti], eps));
        }
        const auto shifts = make_shift_set(fine_grid);
        auto analysis = analyze_pairs(pairs, times, mf, ma, mb,
                                      [&](const DensityEstimate& f, const DensityEstimate& g) {
                                          return besov_distance(f, g, cfg.alpha, cfg.n_diff, shifts);
                                      });
        out.besov = finish_experiment(analysis, fine_grid, rec.blowups, rec.paths, besov_dir);
    }
    return out;
}

HolderExperimentResult run_l1_holder(const ExperimentConfig& cfg, const std::string& out_dir) {
    LabSetup lab = LabSetup::from_config(cfg);
    HolderExperimentResult res = *run_pair_experiments(lab, cfg, true, false, out_dir).l1;
    if (!res.fit_ok) throw std::runtime_error("l1 experiment: exponent fit refused");
    return res;
}

HolderExperimentResult run_besov_holder(const ExperimentConfig& cfg, const std::string& out_dir) {
    LabSetup lab = LabSetup::from_config(cfg);
    HolderExperimentResult res = *run_pair_experiments(lab, cfg, false, true, out_dir).besov;
    if (!res.fit_ok) throw std::runtime_error("besov experiment: exponent fit refused");
    return res;
}

TimedepResult timedep_norms(const EnsembleRecord& rec, const ExperimentConfig& cfg,
                            std::span<const std::size_t> time_indices, double alpha, int n) {
    TimedepResult out;
    std::vector<double> lx, ly;
    for (std::size_t ti : time_indices) {
        std::vector<std::size_t> one{ti};
        const double box = auto_box(cfg, rec, one);
        DensityEstimate f = estimate_density(rec.samples_at(ti), box, cfg.bins);
        const double eps =
            cfg.mollify_eps > 0.0 ? cfg.mollify_eps : 4.0 * f.fn.grid.cell_width();
        DensityEstimate m = mollify(f, eps);
        const auto shifts = make_shift_set(m.fn.grid);
        const double norm = l1_norm(m.fn) + besov_seminorm(m.fn, alpha, n, shifts);
        out.rows.push_back({rec.times[ti], norm});
        lx.push_back(std::log(rec.times[ti]));
        ly.push_back(std::log(norm));
    }
    const double n_pts = double(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n_pts;
    my /= n_pts;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    out.fitted_exponent = sxy / sxx;
    return out;
}

void write_distances_csv(const std::string& path, std::span<const PairRow> rows) {
    CsvWriter csv(path);
    csv.header({"s", "t", "gap", "distance", "stderr", "used"});
    for (const auto& r : rows)
        csv.row({r.s, r.t, r.gap, r.distance, r.stderr_, r.used ? 1.0 : 0.0});
}

void write_fit_csv(const std::string& path, const HoelderFit& fit, double noise_floor) {
    CsvWriter csv(path);
    csv.header({"slope", "intercept", "r2", "noise_floor"});
    csv.row({fit.slope, fit.intercept, fit.r_squared, noise_floor});
}

void write_diagnostics_csv(const std::string& path, std::span<const DiagnosticRow> rows) {
    CsvWriter csv(path);
    std::ofstream* raw = nullptr;
    (void)raw;
    csv.header({"property", "measured", "tolerance", "pass"});
    for (const auto& r : rows)
        csv.raw_row({r.property, CsvWriter::format(r.measured), CsvWriter::format(r.tolerance),
                     r.pass ? "1" : "0"});
}

}  // namespace sgns
