#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sgns/noise_model.hpp"
#include "sgns/spectral_basis.hpp"

namespace sgns {

/// Running state of the measure-change weight along one trajectory.
///
/// log_g accumulates the log of the stochastic exponential that maps the law
/// of the drift-reduced chain back to the law of the full chain. The stopping
/// budget (integral of the squared whitened removed drift) truncates the
/// accumulation once it reaches n_threshold; afterwards log_g is frozen.
struct GirsanovWeight {
    double log_g = 0.0;
    double stopping_integral = 0.0;
    double n_threshold = 0.0;
    bool stopped = false;

    explicit GirsanovWeight(double n = 0.0) : n_threshold(n) {
        if (stopping_integral >= n_threshold) stopped = true;
    }
};

/// One accumulation step. `drift_white` is the removed F-drift divided
/// componentwise by the noise amplitudes; `dw_white` is the whitened noise
/// increment on the same F components (variance dt each). Left-point rule:
/// the caller evaluates both at the state before the step.
void advance_weight(GirsanovWeight& w, std::span<const double> drift_white,
                    std::span<const double> dw_white, double dt);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Monte-Carlo mean and standard error of exp(log_g) over an ensemble.
/// Contract: |mean - 1| <= 3 stderr (exact martingale of the discrete weight).
MeanStderr martingale_diagnostic(std::span<const double> log_g_at_t);

struct LogMomentReport {
    double lhs = 0.0;        // E[ G_t |log(G_t/G_s)| ]
    double stderr_ = 0.0;
    double rhs_shape = 0.0;  // sqrt(t-s) (1+|x0|^2)^2
    double fitted_constant = 0.0;
};

LogMomentReport log_moment_diagnostic(std::span<const double> log_g_s,
                                      std::span<const double> log_g_t, double s, double t,
                                      double x0_norm);

struct IncrementReport {
    double value = 0.0;           // |E[(G_t - G_s) X]|
    double stderr_ = 0.0;
    double martingale_gap = 0.0;  // |E[G_t - G_s]|
    double martingale_stderr = 0.0;
    double bound = 0.0;           // 2 E[G_t |log(G_t/G_s)|]
};

/// X is evaluated per path from (log_g_s, log_g_t); callers pass bounded
/// test variables with |X| <= 1.
IncrementReport increment_diagnostic(std::span<const double> log_g_s,
                                     std::span<const double> log_g_t,
                                     const std::function<double(double, double)>& x_of_path);

/// Empirical tail probabilities P[stopping integral at time t >= n] for a
/// grid of budgets n; nonincreasing in n by construction.
std::vector<double> stopping_probability(std::span<const double> stop_integral_at_t,
                                         std::span<const double> n_values);

/// Pointwise check of the elementary inequality x y <= eps e^{y/eps} + eps x log x.
bool elementary_inequality_holds(double x, double y, double eps);

}  // namespace sgns
