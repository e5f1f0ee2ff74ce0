#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sgns/girsanov.hpp"
#include "sgns/noise_model.hpp"
#include "sgns/spectral_basis.hpp"

namespace sgns {

/// Which of the four coupled systems to integrate.
///
///   full_u        : full Galerkin dynamics on every component.
///   reduced_v     : drift removed on the F components (pure noise there).
///   truncated_vn  : drift removed on F until the stopping budget n is spent,
///                   full dynamics afterwards.
///   killed_u_eps  : full dynamics up to time t - eps, drift removed on F after.
struct SystemVariant {
    enum class Tag { FullU, ReducedV, TruncatedVn, KilledUEps };
    Tag tag = Tag::FullU;
    double n_threshold = 0.0;  // TruncatedVn
    double kill_t = 0.0;       // KilledUEps
    double kill_eps = 0.0;

    static SystemVariant full_u() { return {Tag::FullU, 0, 0, 0}; }
    static SystemVariant reduced_v() { return {Tag::ReducedV, 0, 0, 0}; }
    static SystemVariant truncated_vn(double n);
    static SystemVariant killed_u_eps(double t, double eps);

    bool needs_subspace() const { return tag != Tag::FullU; }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<VelocityState> states;
    std::vector<double> weight_log;     // present iff variant is truncated_vn
    std::vector<double> stop_integral;  // present for reduced_v and truncated_vn
    std::optional<double> tau_hit;
    bool blown_up = false;
};

/// Colored increments for a fixed number of steps; lets two variants share
/// one realization of the driving noise.
struct NoisePath {
    std::size_t steps = 0;
    std::size_t dim = 0;
    std::vector<double> inc;  // steps x dim, row-major

    static NoisePath sample(const CovarianceSpec& cov, std::size_t steps, double dt,
                            std::mt19937_64& rng);
    std::span<const double> at(std::size_t step) const {
        return {inc.data() + step * dim, dim};
    }
};

class NoiseSource {
  public:
    virtual ~NoiseSource() = default;
    virtual void next_increment(std::span<double> colored) = 0;
};

class GaussianNoise final : public NoiseSource {
  public:
    GaussianNoise(const CovarianceSpec& cov, double dt, std::uint64_t seed)
        : cov_(&cov), sqrt_dt_(std::sqrt(dt)), rng_(seed) {}
    void next_increment(std::span<double> colored) override;

  private:
    const CovarianceSpec* cov_;
    double sqrt_dt_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

class PathNoise final : public NoiseSource {
  public:
    explicit PathNoise(const NoisePath& path) : path_(&path) {}
    void next_increment(std::span<double> colored) override;

  private:
    const NoisePath* path_;
    std::size_t at_ = 0;
};

/// Receives the state after every step (and once at step 0).
struct StepVisitor {
    virtual ~StepVisitor() = default;
    virtual void visit(std::size_t step, double t, const VelocityState& x,
                       const GirsanovWeight* weight, double raw_stop_integral) = 0;
};

struct IntegrateResult {
    bool blown_up = false;
    double sup_norm_h = 0.0;
    GirsanovWeight weight{0.0};
    double raw_stop_integral = 0.0;
    std::optional<double> tau_hit;
};

struct IntegratorOptions {
    double blowup_threshold = 1e6;
    /// Track the weight along reduced_v with this budget (truncated_vn always
    /// tracks its own). The reduced dynamics are unaffected.
    std::optional<double> track_weight_n;
};

/// The Galerkin system at a fixed cutoff with its noise model and target
/// subspace. All simulation entry points are const and reentrant; parallel
/// ensembles hand each worker its own noise source.
class GalerkinSystem {
  public:
    GalerkinSystem(const FourierBasis& basis, const ConvolutionTable& conv, CovarianceSpec cov,
                   SubspaceF f_space, double nu, bool bilinear_enabled = true);

    const FourierBasis& basis() const { return *basis_; }
    const ConvolutionTable& conv() const { return *conv_; }
    const CovarianceSpec& covariance() const { return cov_; }
    const SubspaceF& subspace() const { return f_space_; }
    double nu() const { return nu_; }
    bool bilinear_enabled() const { return bilinear_enabled_; }

    /// Removed-drift functional S^+ pi_F (nu A w + B(w,w)) as a state vector.
    VelocityState drift_functional(const VelocityState& w) const;

    /// One semi-implicit step in place; `t` is the time at the start of the
    /// step, `colored_inc` a realization of the per-step noise integral.
    void step(VelocityState& x, const SystemVariant& variant, double t, double dt,
              std::span<const double> colored_inc, GirsanovWeight* weight) const;

    /// Accumulate the weight for one step using the same increment that fed
    /// the integrator (left-point evaluation at `state`).
    void update_weight(GirsanovWeight& weight, const VelocityState& state,
                       std::span<const double> colored_inc, double dt) const;

    IntegrateResult integrate(const VelocityState& x0, const SystemVariant& variant, double T,
                              double dt, NoiseSource& noise, StepVisitor* visitor,
                              const IntegratorOptions& opts = {}) const;

    Trajectory simulate(const VelocityState& x0, const SystemVariant& variant, double T,
                        double dt, std::uint64_t seed, const IntegratorOptions& opts = {}) const;
    Trajectory simulate(const VelocityState& x0, const SystemVariant& variant, double T,
                        double dt, const NoisePath& path, const IntegratorOptions& opts = {}) const;

    static std::size_t step_count(double T, double dt);

  private:
    const FourierBasis* basis_;
    const ConvolutionTable* conv_;
    CovarianceSpec cov_;
    SubspaceF f_space_;
    double nu_;
    bool bilinear_enabled_;
    std::vector<char> in_f_;  // per-coefficient membership in F

    struct StepFactors {
        double dt = 0.0;
        std::vector<double> expfac;   // exp(-nu lambda dt)
        std::vector<double> noisefac; // matches the per-step OU noise variance exactly
    };
    StepFactors make_factors(double dt) const;

    void step_impl(VelocityState& x, const SystemVariant& variant, double t,
                   const StepFactors& f, std::span<const double> colored_inc,
                   GirsanovWeight* weight, double* raw_integral, const VelocityState* bval) const;
    bool drift_removed_on_f(const SystemVariant& variant, double t, double dt,
                            const GirsanovWeight* weight) const;
};

struct EnergyMomentReport {
    double lhs = 0.0;       // MC estimate of E[ sup_t |u|_H^p ]
    double c_p_fitted = 0.0;
    double rhs = 0.0;       // c_p (1 + |x0|^p)
    bool bound_ok = false;  // finite and stable under halving the ensemble
};

EnergyMomentReport energy_moment_check(std::span<const double> sup_norm_h, double p,
                                       double x0_norm);

}  // namespace sgns
