#include "sgns/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace sgns {

CovarianceSpec CovarianceSpec::isotropic_decay(const FourierBasis& basis, double sigma0,
                                               double gamma) {
    if (sigma0 <= 0.0) throw std::invalid_argument("CovarianceSpec: sigma0 must be positive");
    if (gamma < 0.0) throw std::invalid_argument("CovarianceSpec: gamma must be nonnegative");
    CovarianceSpec cov;
    cov.gamma = gamma;
    cov.sigma0 = sigma0;
    cov.sigmas.resize(basis.size());
    double tr = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double s = sigma0 * std::pow(basis.eigenvalue(i), -gamma);
        cov.sigmas[i] = s;
        tr += s * s;
    }
    cov.trace_sigma2 = tr;
    return cov;
}

SubspaceF make_subspace(const CovarianceSpec& cov, std::vector<int> indices) {
    if (indices.empty()) throw std::invalid_argument("SubspaceF: needs at least one index");
    std::unordered_set<int> seen;
    for (int i : indices) {
        if (i < 0 || std::size_t(i) >= cov.sigmas.size())
            throw std::invalid_argument("SubspaceF: index out of range");
        if (!seen.insert(i).second) throw std::invalid_argument("SubspaceF: duplicate index");
    }
    SubspaceF f{std::move(indices)};
    if (!projected_covariance(cov, f).positive_definite)
        throw std::runtime_error("SubspaceF: projected covariance is singular on F");
    return f;
}

VelocityState sample_increment(const CovarianceSpec& cov, double dt, std::mt19937_64& rng) {
    if (dt <= 0.0) throw std::invalid_argument("sample_increment: dt must be positive");
    VelocityState inc(cov.sigmas.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sq = std::sqrt(dt);
    for (std::size_t i = 0; i < inc.size(); ++i) inc.c[i] = cov.sigmas[i] * sq * normal(rng);
    return inc;
}

VelocityState pseudo_inverse_apply(const CovarianceSpec& cov, const SubspaceF& f_space,
                                   std::span<const double> f) {
    if (f.size() != std::size_t(f_space.dim()))
        throw std::invalid_argument("pseudo_inverse_apply: dimension mismatch");
    VelocityState x(cov.sigmas.size());
    for (int j = 0; j < f_space.dim(); ++j) {
        const double s = cov.sigmas[std::size_t(f_space.indices[j])];
        if (s < kDegeneracyTol)
            throw std::runtime_error("pseudo_inverse_apply: degenerate amplitude on F");
        x.c[std::size_t(f_space.indices[j])] = f[std::size_t(j)] / s;
    }
    return x;
}

ProjectedCovariance projected_covariance(const CovarianceSpec& cov, const SubspaceF& f_space) {
    ProjectedCovariance pc;
    pc.d = f_space.dim();
    pc.matrix.assign(std::size_t(pc.d) * pc.d, 0.0);
    double min_eig = std::numeric_limits<double>::infinity();
    for (int j = 0; j < pc.d; ++j) {
        double s = cov.sigmas[std::size_t(f_space.indices[std::size_t(j)])];
        pc.matrix[std::size_t(j) * pc.d + j] = s * s;
        min_eig = std::min(min_eig, s * s);
    }
    pc.min_eigenvalue = min_eig;
    pc.positive_definite = min_eig > kDegeneracyTol * kDegeneracyTol;
    return pc;
}

AssumptionReport check_assumptions(const CovarianceSpec& cov, const SubspaceF& f_space,
                                   std::size_t basis_size) {
    for (int i : f_space.indices)
        if (std::size_t(i) >= basis_size)
            throw std::invalid_argument("check_assumptions: F index beyond basis size");
    AssumptionReport r;
    double smin = std::numeric_limits<double>::infinity();
    double smax = 0.0;
    for (int i : f_space.indices) {
        double s2 = cov.sigmas[std::size_t(i)] * cov.sigmas[std::size_t(i)];
        smin = std::min(smin, s2);
        smax = std::max(smax, s2);
    }
    r.hpgirsanov2 = true;
    for (int i : f_space.indices) r.hpgirsanov2 = r.hpgirsanov2 && cov.sigmas[std::size_t(i)] > kDegeneracyTol;
    r.hpbesov = projected_covariance(cov, f_space).positive_definite;
    r.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace sgns
