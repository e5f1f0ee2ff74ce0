#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sgns {

using Vec3i = std::array<int, 3>;
using Vec3d = std::array<double, 3>;
using Cplx = std::complex<double>;

inline Vec3i negate(const Vec3i& k) { return {-k[0], -k[1], -k[2]}; }
inline bool is_zero(const Vec3i& k) { return k[0] == 0 && k[1] == 0 && k[2] == 0; }
inline int linf_norm(const Vec3i& k);
inline double dot(const Vec3d& a, const Vec3d& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

enum class Parity : std::uint8_t { Cosine = 0, Sine = 1 };

/// One real divergence-free Fourier mode on the torus [0,2pi)^3.
///
/// Each canonical wavevector carries four elements: {cosine,sine} x two
/// polarizations orthogonal to k. Fields are L2-orthonormal and the element
/// is an eigenvector of the Stokes operator with eigenvalue |k|^2.
struct BasisElement {
    int index = -1;
    Vec3i wavevector{};
    Parity parity = Parity::Cosine;
    int polarization = 1;  // 1 or 2
    double eigenvalue = 0.0;
    Vec3d pol_vector{};
};

/// Coefficient vector of a real divergence-free field over a FourierBasis.
struct VelocityState {
    std::vector<double> c;

    explicit VelocityState(std::size_t n = 0) : c(n, 0.0) {}
    std::size_t size() const { return c.size(); }
    double& operator[](std::size_t i) { return c[i]; }
    double operator[](std::size_t i) const { return c[i]; }
};

double norm_h(const VelocityState& u);
double inner_h(const VelocityState& u, const VelocityState& v);
bool all_finite(const VelocityState& u);

class FourierBasis;
/// iid centered Gaussian coefficients with the given standard deviation.
VelocityState random_state(const FourierBasis& basis, std::mt19937_64& rng, double scale = 1.0);

/// Divergence-free real Fourier basis with |k|_inf <= cutoff, k != 0.
///
/// Canonical representative of {k,-k} is the lexicographically larger one.
/// Elements are ordered by (eigenvalue, k, parity, polarization), so the four
/// elements of one wavevector always occupy a contiguous block.
class FourierBasis {
  public:
    static FourierBasis build(int cutoff);

    int cutoff() const { return cutoff_; }
    std::size_t size() const { return elements_.size(); }
    std::size_t canonical_count() const { return canonical_.size(); }
    const BasisElement& element(std::size_t i) const { return elements_[i]; }
    const std::vector<BasisElement>& elements() const { return elements_; }
    const Vec3i& canonical(std::size_t ci) const { return canonical_[ci]; }
    /// Element index of (canonical ci, parity, polarization).
    std::size_t block_index(std::size_t ci, Parity p, int pol) const {
        return 4 * ci + 2 * static_cast<std::size_t>(p) + static_cast<std::size_t>(pol - 1);
    }
    const Vec3d& pol_vector(std::size_t ci, int pol) const {
        return elements_[block_index(ci, Parity::Cosine, pol)].pol_vector;
    }
    double eigenvalue(std::size_t i) const { return elements_[i].eigenvalue; }

    /// Evaluate the field of element i at a point x (for quadrature oracles).
    Vec3d evaluate_element(std::size_t i, const Vec3d& x) const;

    VelocityState zero_state() const { return VelocityState(size()); }

  private:
    int cutoff_ = 0;
    std::vector<BasisElement> elements_;
    std::vector<Vec3i> canonical_;
};

/// Projection I - k k^T / |k|^2 applied to a complex mode coefficient.
/// Rejects k = 0.
std::array<Cplx, 3> leray_project(const Vec3i& k, const std::array<Cplx, 3>& f);

/// Multiply every coefficient by its Stokes eigenvalue |k|^2.
VelocityState stokes_apply(const FourierBasis& basis, const VelocityState& u);

/// Galerkin-truncated advection term pi_N P_L (u . grad v), computed by exact
/// mode convolution over the resolved set. Mode pairs are enumerated once at
/// construction; apply() is pure and reentrant given a per-thread Workspace.
class ConvolutionTable {
  public:
    struct Workspace {
        std::vector<std::array<Cplx, 3>> uhat, vhat, what;
    };

    explicit ConvolutionTable(const FourierBasis& basis);

    const FourierBasis& basis() const { return *basis_; }

    void apply(const VelocityState& u, const VelocityState& v, VelocityState& out,
               Workspace& ws) const;
    VelocityState apply(const VelocityState& u, const VelocityState& v) const;

    /// <u1, B(u2, u3)> under the H inner product.
    double trilinear(const VelocityState& u1, const VelocityState& u2,
                     const VelocityState& u3) const;

    std::size_t pair_count() const { return entries_.size(); }

  private:
    struct PairEntry {
        std::uint16_t p_can, q_can;
        std::uint8_t p_conj, q_conj;
        Vec3d q_vec;
    };

    const FourierBasis* basis_;
    std::vector<PairEntry> entries_;       // grouped by output mode
    std::vector<std::uint32_t> out_begin_; // per canonical output, offsets into entries_

    void to_complex(const VelocityState& u, std::vector<std::array<Cplx, 3>>& uhat) const;
    void from_complex(const std::vector<std::array<Cplx, 3>>& what, VelocityState& out) const;
};

inline int linf_norm(const Vec3i& k) {
    int m = 0;
    for (int c : k) m = std::max(m, c < 0 ? -c : c);
    return m;
}

}  // namespace sgns
