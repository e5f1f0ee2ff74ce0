#include "sgns/integrator.hpp"

#include <cmath>
#include <stdexcept>

namespace sgns {

SystemVariant SystemVariant::truncated_vn(double n) {
    if (n < 0.0) throw std::invalid_argument("truncated_vn: n must be >= 0");
    SystemVariant v;
    v.tag = Tag::TruncatedVn;
    v.n_threshold = n;
    return v;
}

SystemVariant SystemVariant::killed_u_eps(double t, double eps) {
    if (!(eps > 0.0 && eps < t))
        throw std::invalid_argument("killed_u_eps: requires 0 < eps < t");
    SystemVariant v;
    v.tag = Tag::KilledUEps;
    v.kill_t = t;
    v.kill_eps = eps;
    return v;
}

NoisePath NoisePath::sample(const CovarianceSpec& cov, std::size_t steps, double dt,
                            std::mt19937_64& rng) {
    NoisePath p;
    p.steps = steps;
    p.dim = cov.sigmas.size();
    p.inc.resize(steps * p.dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sq = std::sqrt(dt);
    for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t i = 0; i < p.dim; ++i)
            p.inc[k * p.dim + i] = cov.sigmas[i] * sq * normal(rng);
    return p;
}

void GaussianNoise::next_increment(std::span<double> colored) {
    for (std::size_t i = 0; i < colored.size(); ++i)
        colored[i] = cov_->sigmas[i] * sqrt_dt_ * normal_(rng_);
}

void PathNoise::next_increment(std::span<double> colored) {
    if (at_ >= path_->steps) throw std::runtime_error("PathNoise: path exhausted");
    auto row = path_->at(at_++);
    std::copy(row.begin(), row.end(), colored.begin());
}

GalerkinSystem::GalerkinSystem(const FourierBasis& basis, const ConvolutionTable& conv,
                               CovarianceSpec cov, SubspaceF f_space, double nu,
                               bool bilinear_enabled)
    : basis_(&basis),
      conv_(&conv),
      cov_(std::move(cov)),
      f_space_(std::move(f_space)),
      nu_(nu),
      bilinear_enabled_(bilinear_enabled) {
    if (cov_.sigmas.size() != basis.size())
        throw std::invalid_argument("GalerkinSystem: covariance/basis size mismatch");
    in_f_.assign(basis.size(), 0);
    for (int i : f_space_.indices) in_f_[std::size_t(i)] = 1;
}

std::size_t GalerkinSystem::step_count(double T, double dt) {
    if (T <= 0.0 || dt <= 0.0) throw std::invalid_argument("step_count: T, dt must be positive");
    const double raw = T / dt;
    const auto steps = std::size_t(std::llround(raw));
    if (steps == 0 || std::abs(double(steps) * dt - T) > 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("step_count: dt must divide T");
    return steps;
}

GalerkinSystem::StepFactors GalerkinSystem::make_factors(double dt) const {
    StepFactors f;
    f.dt = dt;
    const std::size_t m = basis_->size();
    f.expfac.resize(m);
    f.noisefac.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double a = nu_ * basis_->eigenvalue(i);
        if (a * dt < 1e-12) {
            f.expfac[i] = std::exp(-a * dt);
            f.noisefac[i] = 1.0;
        } else {
            f.expfac[i] = std::exp(-a * dt);
            f.noisefac[i] = std::sqrt((1.0 - std::exp(-2.0 * a * dt)) / (2.0 * a * dt));
        }
    }
    return f;
}

VelocityState GalerkinSystem::drift_functional(const VelocityState& w) const {
    if (f_space_.indices.empty())
        throw std::runtime_error("drift_functional: system has no target subspace");
    VelocityState drift(basis_->size());
    VelocityState b = bilinear_enabled_ ? conv_->apply(w, w) : VelocityState(basis_->size());
    std::vector<double> f(std::size_t(f_space_.dim()));
    for (int j = 0; j < f_space_.dim(); ++j) {
        const auto i = std::size_t(f_space_.indices[std::size_t(j)]);
        f[std::size_t(j)] = nu_ * basis_->eigenvalue(i) * w.c[i] + b.c[i];
    }
    return pseudo_inverse_apply(cov_, f_space_, f);
}

bool GalerkinSystem::drift_removed_on_f(const SystemVariant& variant, double t, double dt,
                                        const GirsanovWeight* weight) const {
    switch (variant.tag) {
        case SystemVariant::Tag::FullU:
            return false;
        case SystemVariant::Tag::ReducedV:
            return true;
        case SystemVariant::Tag::TruncatedVn:
            return weight != nullptr && !weight->stopped;
        case SystemVariant::Tag::KilledUEps:
            // full dynamics for every step that ends at or before t - eps
            return t + dt > variant.kill_t - variant.kill_eps + 1e-12;
    }
    return false;
}

void GalerkinSystem::step_impl(VelocityState& x, const SystemVariant& variant, double t,
                               const StepFactors& f, std::span<const double> colored_inc,
                               GirsanovWeight* weight, double* raw_integral,
                               const VelocityState* bval) const {
    const std::size_t m = basis_->size();
    const double dt = f.dt;
    const bool removed = drift_removed_on_f(variant, t, dt, weight);
    const int d = f_space_.dim();

    // Removed-drift functional at the pre-step state, whitened (left point).
    double h2 = 0.0;
    double small_h[8];
    std::vector<double> big_h;
    double* h_white = nullptr;
    const bool need_h = (weight != nullptr && !weight->stopped) || raw_integral != nullptr;
    if (need_h) {
        h_white = d <= 8 ? small_h : (big_h.resize(std::size_t(d)), big_h.data());
        for (int j = 0; j < d; ++j) {
            const auto i = std::size_t(f_space_.indices[std::size_t(j)]);
            const double drift = nu_ * basis_->eigenvalue(i) * x.c[i] + (bval ? bval->c[i] : 0.0);
            h_white[j] = drift / cov_.sigmas[i];
            h2 += h_white[j] * h_white[j];
        }
    }

    const double* b = bval ? bval->c.data() : nullptr;
    for (std::size_t i = 0; i < m; ++i) {
        if (in_f_[i]) {
            // F components always receive the raw increment; the drift-active
            // chains differ from the drift-removed ones by the dt-drift alone,
            // which is exactly what the weight compensates.
            if (removed)
                x.c[i] += colored_inc[i];
            else
                x.c[i] = f.expfac[i] * x.c[i] - (b ? dt * b[i] : 0.0) + colored_inc[i];
        } else {
            x.c[i] = f.expfac[i] * x.c[i] - (b ? dt * b[i] : 0.0) + f.noisefac[i] * colored_inc[i];
        }
    }

    if (weight != nullptr && !weight->stopped) {
        double small_dw[8];
        std::vector<double> big_dw;
        double* dw = d <= 8 ? small_dw : (big_dw.resize(std::size_t(d)), big_dw.data());
        for (int j = 0; j < d; ++j) {
            const auto i = std::size_t(f_space_.indices[std::size_t(j)]);
            dw[j] = colored_inc[i] / cov_.sigmas[i];
        }
        advance_weight(*weight, {h_white, std::size_t(d)}, {dw, std::size_t(d)}, dt);
    }
    if (raw_integral != nullptr) *raw_integral += h2 * dt;
}

void GalerkinSystem::step(VelocityState& x, const SystemVariant& variant, double t, double dt,
                          std::span<const double> colored_inc, GirsanovWeight* weight) const {
    if (variant.needs_subspace() && f_space_.indices.empty())
        throw std::runtime_error("step: variant requires a target subspace");
    StepFactors f = make_factors(dt);
    VelocityState b;
    const VelocityState* bp = nullptr;
    if (bilinear_enabled_) {
        b = conv_->apply(x, x);
        bp = &b;
    }
    step_impl(x, variant, t, f, colored_inc, weight, nullptr, bp);
}

void GalerkinSystem::update_weight(GirsanovWeight& weight, const VelocityState& state,
                                   std::span<const double> colored_inc, double dt) const {
    if (weight.stopped) return;
    const VelocityState h = drift_functional(state);
    const int d = f_space_.dim();
    std::vector<double> hw(static_cast<std::size_t>(d));
    std::vector<double> dw(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        const auto i = std::size_t(f_space_.indices[std::size_t(j)]);
        hw[std::size_t(j)] = h.c[i];
        dw[std::size_t(j)] = colored_inc[i] / cov_.sigmas[i];
    }
    advance_weight(weight, hw, dw, dt);
}

IntegrateResult GalerkinSystem::integrate(const VelocityState& x0, const SystemVariant& variant,
                                          double T, double dt, NoiseSource& noise,
                                          StepVisitor* visitor,
                                          const IntegratorOptions& opts) const {
    if (variant.needs_subspace() && f_space_.indices.empty())
        throw std::runtime_error("integrate: variant requires a target subspace");
    const std::size_t steps = step_count(T, dt);
    const StepFactors f = make_factors(dt);
    const std::size_t m = basis_->size();

    IntegrateResult res;
    VelocityState x = x0;
    res.sup_norm_h = norm_h(x);

    const bool is_truncated = variant.tag == SystemVariant::Tag::TruncatedVn;
    const bool is_reduced = variant.tag == SystemVariant::Tag::ReducedV;
    GirsanovWeight weight(is_truncated ? variant.n_threshold
                                       : opts.track_weight_n.value_or(0.0));
    const bool track_weight = is_truncated || (is_reduced && opts.track_weight_n.has_value());
    const bool track_raw = is_reduced;
    double raw_integral = 0.0;

    if (is_truncated && weight.stopped) res.tau_hit = 0.0;
    if (visitor)
        visitor->visit(0, 0.0, x, track_weight ? &weight : nullptr, raw_integral);

    VelocityState bbuf(m);
    ConvolutionTable::Workspace ws;
    std::vector<double> inc(m);

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = double(k) * dt;
        noise.next_increment(inc);
        const VelocityState* bp = nullptr;
        if (bilinear_enabled_) {
            conv_->apply(x, x, bbuf, ws);
            bp = &bbuf;
        }
        const bool was_stopped = weight.stopped;
        step_impl(x, variant, t, f, inc, track_weight ? &weight : nullptr,
                  track_raw ? &raw_integral : nullptr, bp);
        if (is_truncated && !was_stopped && weight.stopped && !res.tau_hit)
            res.tau_hit = double(k + 1) * dt;

        const double nh = norm_h(x);
        if (!std::isfinite(nh) || nh > opts.blowup_threshold) {
            res.blown_up = true;
            break;
        }
        res.sup_norm_h = std::max(res.sup_norm_h, nh);
        if (visitor)
            visitor->visit(k + 1, double(k + 1) * dt, x, track_weight ? &weight : nullptr,
                           raw_integral);
    }
    res.weight = weight;
    res.raw_stop_integral = raw_integral;
    return res;
}

namespace {

struct TrajectoryRecorder final : StepVisitor {
    Trajectory* out;
    bool want_weight;
    bool want_integral;

    void visit(std::size_t, double t, const VelocityState& x, const GirsanovWeight* w,
               double raw_integral) override {
        out->times.push_back(t);
        out->states.push_back(x);
        if (want_weight && w) out->weight_log.push_back(w->log_g);
        if (want_integral) {
            if (w && want_weight)
                out->stop_integral.push_back(w->stopping_integral);
            else
                out->stop_integral.push_back(raw_integral);
        }
    }
};

}  // namespace

Trajectory GalerkinSystem::simulate(const VelocityState& x0, const SystemVariant& variant,
                                    double T, double dt, std::uint64_t seed,
                                    const IntegratorOptions& opts) const {
    GaussianNoise noise(cov_, dt, seed);
    Trajectory traj;
    TrajectoryRecorder rec;
    rec.out = &traj;
    rec.want_weight = variant.tag == SystemVariant::Tag::TruncatedVn;
    rec.want_integral = variant.tag == SystemVariant::Tag::TruncatedVn ||
                        variant.tag == SystemVariant::Tag::ReducedV;
    IntegrateResult res = integrate(x0, variant, T, dt, noise, &rec, opts);
    traj.blown_up = res.blown_up;
    traj.tau_hit = res.tau_hit;
    return traj;
}

Trajectory GalerkinSystem::simulate(const VelocityState& x0, const SystemVariant& variant,
                                    double T, double dt, const NoisePath& path,
                                    const IntegratorOptions& opts) const {
    PathNoise noise(path);
    Trajectory traj;
    TrajectoryRecorder rec;
    rec.out = &traj;
    rec.want_weight = variant.tag == SystemVariant::Tag::TruncatedVn;
    rec.want_integral = variant.tag == SystemVariant::Tag::TruncatedVn ||
                        variant.tag == SystemVariant::Tag::ReducedV;
    IntegrateResult res = integrate(x0, variant, T, dt, noise, &rec, opts);
    traj.blown_up = res.blown_up;
    traj.tau_hit = res.tau_hit;
    return traj;
}

EnergyMomentReport energy_moment_check(std::span<const double> sup_norm_h, double p,
                                       double x0_norm) {
    if (sup_norm_h.size() < 2) throw std::invalid_argument("energy_moment_check: ensemble too small");
    EnergyMomentReport r;
    double full = 0.0, half = 0.0;
    const std::size_t n = sup_norm_h.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::pow(sup_norm_h[i], p);
        full += v;
        if (i < n / 2) half += v;
    }
    full /= double(n);
    half /= double(n / 2);
    r.lhs = full;
    r.c_p_fitted = full / (1.0 + std::pow(x0_norm, p));
    r.rhs = r.c_p_fitted * (1.0 + std::pow(x0_norm, p));
    const double denom = std::max(full, 1e-300);
    r.bound_ok = std::isfinite(full) && std::abs(full - half) / denom <= 0.10;
    if (full == 0.0 && half == 0.0) r.bound_ok = true;
    return r;
}

}  // namespace sgns
