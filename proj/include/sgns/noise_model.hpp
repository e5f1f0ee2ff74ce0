#pragma once

#include <random>
#include <span>
#include <vector>

#include "sgns/spectral_basis.hpp"

namespace sgns {

/// Tolerance below which a noise amplitude counts as degenerate.
inline constexpr double kDegeneracyTol = 1e-14;

/// Diagonal noise covariance on the spectral basis: sigma_i = sigma0 * lambda_i^(-gamma).
/// The operator is diagonal in the Stokes eigenbasis, so the pseudo-inverse and
/// the non-degeneracy checks are componentwise.
struct CovarianceSpec {
    std::vector<double> sigmas;
    double gamma = 1.0;
    double sigma0 = 1.0;
    double trace_sigma2 = 0.0;  // sum of sigma_i^2 at this cutoff

    static CovarianceSpec isotropic_decay(const FourierBasis& basis, double sigma0, double gamma);
};

/// A finite-dimensional target subspace spanned by basis elements.
struct SubspaceF {
    std::vector<int> indices;

    int dim() const { return int(indices.size()); }
};

/// Validates indices and non-degeneracy of the projected covariance.
SubspaceF make_subspace(const CovarianceSpec& cov, std::vector<int> indices);

/// One colored noise increment: independent N(0, sigma_i^2 dt) per coefficient.
VelocityState sample_increment(const CovarianceSpec& cov, double dt, std::mt19937_64& rng);

/// Minimal-norm solution of (S x)|_F = f: componentwise division on F's
/// indices, zero elsewhere. Throws if any amplitude on F is degenerate.
VelocityState pseudo_inverse_apply(const CovarianceSpec& cov, const SubspaceF& f_space,
                                   std::span<const double> f);

struct ProjectedCovariance {
    int d = 0;
    std::vector<double> matrix;  // row-major d x d
    double min_eigenvalue = 0.0;
    bool positive_definite = false;
};

ProjectedCovariance projected_covariance(const CovarianceSpec& cov, const SubspaceF& f_space);

struct AssumptionReport {
    bool hpbesov = false;      // projected covariance nonsingular
    bool hpgirsanov2 = false;  // amplitudes on F positive (solvability on F)
    double condition_number = 0.0;
};

AssumptionReport check_assumptions(const CovarianceSpec& cov, const SubspaceF& f_space,
                                   std::size_t basis_size);

}  // namespace sgns
