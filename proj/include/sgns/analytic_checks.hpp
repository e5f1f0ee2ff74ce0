#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sgns/density_lab.hpp"

namespace sgns {

/// Gaussian smoothing data: solution operator of the constant-coefficient
/// heat equation with spatial covariance `covariance` run for time `t`.
struct HeatKernelSpec {
    int d = 1;
    std::vector<double> covariance;  // d x d, symmetric positive definite
    double t = 0.0;
};

/// Gaussian convolution of a grid function by quadrature over its own grid.
/// Kernel weights are normalized per output point, so the result is a convex
/// average: sup |U| <= sup |phi| holds exactly.
GridFunction heat_solution(const GridFunction& phi, const HeatKernelSpec& spec);

/// Same quadrature evaluated at one (possibly off-grid) point.
double heat_solution_at(const GridFunction& phi, const HeatKernelSpec& spec,
                        std::span<const double> point);

struct MarkovRepReport {
    double lhs = 0.0;   // E[ G_s phi(pi_F v(t)) ]
    double rhs = 0.0;   // E[ G_s U_phi(t-s, pi_F v(s)) ]
    double gap = 0.0;
    double stderr_ = 0.0;  // stderr of the coupled per-path difference
};

/// Checks the representation of the F-marginal through the heat semigroup on
/// a coupled ensemble: same paths feed both sides.
MarkovRepReport markov_rep_check(std::span<const double> log_g_s, const ProjSamples& v_at_t,
                                 const ProjSamples& v_at_s,
                                 const std::function<double(std::span<const double>)>& phi,
                                 const GridFunction& phi_grid, const HeatKernelSpec& heat);

struct BrownianDiffReport {
    double lhs = 0.0;
    double stderr_ = 0.0;
    double bound_shape = 0.0;  // |phi|_inf (|h|/sqrt(r^s))^n |r-s| / (r v s)
};

/// | E[ Delta_h^n phi(a + beta_r) - Delta_h^n phi(a + beta_s) ] | by common
/// random numbers, where beta_r = sqrt(r) Q Z with diagonal Q.
BrownianDiffReport brownian_diff_check(std::span<const double> a, double r, double s,
                                       std::span<const double> h, int n,
                                       const std::function<double(std::span<const double>)>& phi,
                                       double phi_sup, std::span<const double> q_diag,
                                       std::size_t samples, std::uint64_t seed);

/// Two-term truncation bound minimized over an epsilon grid:
/// min_eps eps ( c_fit sqrt(T) (1+|x0|^2)^2 + e^{2/eps} p_tau ).
double truncation_bound(std::span<const double> eps_grid, double c_fit, double T, double x0_norm,
                        double p_tau);

/// Pointwise n-th difference of a callable along shift h.
double pointwise_difference(const std::function<double(std::span<const double>)>& phi,
                            std::span<const double> x, std::span<const double> h, int n);

}  // namespace sgns
