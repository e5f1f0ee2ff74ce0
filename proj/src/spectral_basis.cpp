#include "sgns/spectral_basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace sgns {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Field normalization: integral of cos^2(k.x) over [0,2pi)^3 is (2pi)^3 / 2.
const double kFieldNorm = std::sqrt(2.0 / (kTwoPi * kTwoPi * kTwoPi));

bool lex_less(const Vec3i& a, const Vec3i& b) {
    return std::tie(a[0], a[1], a[2]) < std::tie(b[0], b[1], b[2]);
}

Vec3d normalize(const Vec3d& v) {
    double n = std::sqrt(dot(v, v));
    return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3d cross(const Vec3d& a, const Vec3d& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Deterministic orthonormal pair orthogonal to k. Axis-parallel wavevectors
// use the two remaining axis unit vectors; otherwise Gram-Schmidt from a
// fixed reference with fallback when k is parallel to the reference.
std::array<Vec3d, 2> polarization_pair(const Vec3i& k) {
    int nonzero = (k[0] != 0) + (k[1] != 0) + (k[2] != 0);
    if (nonzero == 1) {
        int axis = k[0] != 0 ? 0 : (k[1] != 0 ? 1 : 2);
        Vec3d e1{}, e2{};
        e1[(axis + 1) % 3] = 1.0;
        e2[(axis + 2) % 3] = 1.0;
        return {e1, e2};
    }
    Vec3d kd{double(k[0]), double(k[1]), double(k[2])};
    Vec3d khat = normalize(kd);
    Vec3d ref{1.0, 0.0, 0.0};
    double proj = dot(ref, khat);
    Vec3d cand{ref[0] - proj * khat[0], ref[1] - proj * khat[1], ref[2] - proj * khat[2]};
    if (dot(cand, cand) < 1e-12) {
        ref = {0.0, 1.0, 0.0};
        proj = dot(ref, khat);
        cand = {ref[0] - proj * khat[0], ref[1] - proj * khat[1], ref[2] - proj * khat[2]};
    }
    Vec3d e1 = normalize(cand);
    Vec3d e2 = cross(khat, e1);
    return {e1, e2};
}

}  // namespace

double norm_h(const VelocityState& u) { return std::sqrt(inner_h(u, u)); }

double inner_h(const VelocityState& u, const VelocityState& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.c.size(); ++i) s += u.c[i] * v.c[i];
    return s;
}

bool all_finite(const VelocityState& u) {
    for (double x : u.c)
        if (!std::isfinite(x)) return false;
    return true;
}

VelocityState random_state(const FourierBasis& basis, std::mt19937_64& rng, double scale) {
    VelocityState u(basis.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& c : u.c) c = scale * normal(rng);
    return u;
}

FourierBasis FourierBasis::build(int cutoff) {
    if (cutoff < 1) throw std::invalid_argument("FourierBasis: cutoff must be >= 1");
    FourierBasis b;
    b.cutoff_ = cutoff;

    for (int kx = -cutoff; kx <= cutoff; ++kx)
        for (int ky = -cutoff; ky <= cutoff; ++ky)
            for (int kz = -cutoff; kz <= cutoff; ++kz) {
                Vec3i k{kx, ky, kz};
                if (is_zero(k)) continue;
                if (lex_less(k, negate(k))) continue;  // keep the larger of {k,-k}
                b.canonical_.push_back(k);
            }

    std::sort(b.canonical_.begin(), b.canonical_.end(), [](const Vec3i& a, const Vec3i& c) {
        long la = long(a[0]) * a[0] + long(a[1]) * a[1] + long(a[2]) * a[2];
        long lc = long(c[0]) * c[0] + long(c[1]) * c[1] + long(c[2]) * c[2];
        if (la != lc) return la < lc;
        return lex_less(a, c);
    });

    b.elements_.reserve(4 * b.canonical_.size());
    for (const Vec3i& k : b.canonical_) {
        double lambda = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
        auto pol = polarization_pair(k);
        for (Parity p : {Parity::Cosine, Parity::Sine})
            for (int a = 1; a <= 2; ++a) {
                BasisElement e;
                e.index = int(b.elements_.size());
                e.wavevector = k;
                e.parity = p;
                e.polarization = a;
                e.eigenvalue = lambda;
                e.pol_vector = pol[a - 1];
                b.elements_.push_back(e);
            }
    }
    return b;
}

Vec3d FourierBasis::evaluate_element(std::size_t i, const Vec3d& x) const {
    const BasisElement& e = elements_[i];
    double phase = e.wavevector[0] * x[0] + e.wavevector[1] * x[1] + e.wavevector[2] * x[2];
    double trig = (e.parity == Parity::Cosine) ? std::cos(phase) : std::sin(phase);
    double a = kFieldNorm * trig;
    return {a * e.pol_vector[0], a * e.pol_vector[1], a * e.pol_vector[2]};
}

std::array<Cplx, 3> leray_project(const Vec3i& k, const std::array<Cplx, 3>& f) {
    if (is_zero(k)) throw std::invalid_argument("leray_project: k must be nonzero");
    double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    Cplx kf = double(k[0]) * f[0] + double(k[1]) * f[1] + double(k[2]) * f[2];
    Cplx s = kf / k2;
    return {f[0] - double(k[0]) * s, f[1] - double(k[1]) * s, f[2] - double(k[2]) * s};
}

VelocityState stokes_apply(const FourierBasis& basis, const VelocityState& u) {
    VelocityState out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out.c[i] = basis.eigenvalue(i) * u.c[i];
    return out;
}

ConvolutionTable::ConvolutionTable(const FourierBasis& basis) : basis_(&basis) {
    const std::size_t nc = basis.canonical_count();
    const int K = basis.cutoff();

    // index of canonical wavevector, dense lookup over the (2K+1)^3 box
    const int w = 2 * K + 1;
    std::vector<int> lookup(std::size_t(w) * w * w, -1);
    auto box_id = [&](const Vec3i& k) {
        return ((k[0] + K) * w + (k[1] + K)) * w + (k[2] + K);
    };
    for (std::size_t ci = 0; ci < nc; ++ci) lookup[box_id(basis.canonical(ci))] = int(ci);

    auto find_mode = [&](const Vec3i& k, int& can, bool& conj) {
        if (linf_norm(k) > K || is_zero(k)) return false;
        int id = lookup[box_id(k)];
        if (id >= 0) {
            can = id;
            conj = false;
        } else {
            can = lookup[box_id(negate(k))];
            conj = true;
        }
        return true;
    };

    out_begin_.assign(nc + 1, 0);
    // Two passes: count, then fill, so entries stay grouped by output mode.
    for (int pass = 0; pass < 2; ++pass) {
        std::size_t at = 0;
        for (std::size_t co = 0; co < nc; ++co) {
            if (pass == 1) out_begin_[co] = std::uint32_t(at);
            const Vec3i k = basis.canonical(co);
            for (std::size_t cq = 0; cq < nc; ++cq) {
                for (int sq : {+1, -1}) {
                    Vec3i q = sq > 0 ? basis.canonical(cq) : negate(basis.canonical(cq));
                    Vec3i p{k[0] - q[0], k[1] - q[1], k[2] - q[2]};
                    int pcan;
                    bool pconj;
                    if (!find_mode(p, pcan, pconj)) continue;
                    if (pass == 1) {
                        PairEntry e;
                        e.p_can = std::uint16_t(pcan);
                        e.q_can = std::uint16_t(cq);
                        e.p_conj = pconj ? 1 : 0;
                        e.q_conj = sq < 0 ? 1 : 0;
                        e.q_vec = {double(q[0]), double(q[1]), double(q[2])};
                        entries_[at] = e;
                    }
                    ++at;
                }
            }
        }
        if (pass == 0) entries_.resize(at);
        out_begin_[nc] = std::uint32_t(at);
    }
}

void ConvolutionTable::to_complex(const VelocityState& u,
                                  std::vector<std::array<Cplx, 3>>& uhat) const {
    const FourierBasis& b = *basis_;
    const std::size_t nc = b.canonical_count();
    uhat.resize(nc);
    const double half = 0.5 * kFieldNorm;
    for (std::size_t ci = 0; ci < nc; ++ci) {
        const double c1 = u.c[4 * ci + 0], c2 = u.c[4 * ci + 1];
        const double s1 = u.c[4 * ci + 2], s2 = u.c[4 * ci + 3];
        const Vec3d& e1 = b.pol_vector(ci, 1);
        const Vec3d& e2 = b.pol_vector(ci, 2);
        for (int a = 0; a < 3; ++a)
            uhat[ci][a] = Cplx(half * (c1 * e1[a] + c2 * e2[a]),
                               -half * (s1 * e1[a] + s2 * e2[a]));
    }
}

void ConvolutionTable::from_complex(const std::vector<std::array<Cplx, 3>>& what,
                                    VelocityState& out) const {
    const FourierBasis& b = *basis_;
    const std::size_t nc = b.canonical_count();
    const double inv_half = 2.0 / kFieldNorm;
    for (std::size_t ci = 0; ci < nc; ++ci) {
        const Vec3d& e1 = b.pol_vector(ci, 1);
        const Vec3d& e2 = b.pol_vector(ci, 2);
        Cplx d1 = what[ci][0] * e1[0] + what[ci][1] * e1[1] + what[ci][2] * e1[2];
        Cplx d2 = what[ci][0] * e2[0] + what[ci][1] * e2[1] + what[ci][2] * e2[2];
        out.c[4 * ci + 0] = inv_half * d1.real();
        out.c[4 * ci + 1] = inv_half * d2.real();
        out.c[4 * ci + 2] = -inv_half * d1.imag();
        out.c[4 * ci + 3] = -inv_half * d2.imag();
    }
}

void ConvolutionTable::apply(const VelocityState& u, const VelocityState& v,
                             VelocityState& out, Workspace& ws) const {
    const FourierBasis& b = *basis_;
    const std::size_t nc = b.canonical_count();
    to_complex(u, ws.uhat);
    const bool same = (&u == &v);
    const auto& vhat = same ? ws.uhat : (to_complex(v, ws.vhat), ws.vhat);
    ws.what.assign(nc, {Cplx(0.0), Cplx(0.0), Cplx(0.0)});

    for (std::size_t co = 0; co < nc; ++co) {
        double acc_re[3] = {0, 0, 0}, acc_im[3] = {0, 0, 0};
        for (std::uint32_t e = out_begin_[co]; e < out_begin_[co + 1]; ++e) {
            const PairEntry& pe = entries_[e];
            const auto& up = ws.uhat[pe.p_can];
            const auto& vq = vhat[pe.q_can];
            const double ps = pe.p_conj ? -1.0 : 1.0;
            const double qs = pe.q_conj ? -1.0 : 1.0;
            // s = uhat(p) . q   (complex dot real vector)
            double s_re = up[0].real() * pe.q_vec[0] + up[1].real() * pe.q_vec[1] +
                          up[2].real() * pe.q_vec[2];
            double s_im = ps * (up[0].imag() * pe.q_vec[0] + up[1].imag() * pe.q_vec[1] +
                                up[2].imag() * pe.q_vec[2]);
            // accumulate i * s * vhat(q)
            for (int a = 0; a < 3; ++a) {
                double vr = vq[a].real();
                double vi = qs * vq[a].imag();
                double pr = s_re * vr - s_im * vi;
                double pi = s_re * vi + s_im * vr;
                acc_re[a] -= pi;
                acc_im[a] += pr;
            }
        }
        std::array<Cplx, 3> raw{Cplx(acc_re[0], acc_im[0]), Cplx(acc_re[1], acc_im[1]),
                                Cplx(acc_re[2], acc_im[2])};
        ws.what[co] = leray_project(b.canonical(co), raw);
    }

    if (out.size() != b.size()) out = VelocityState(b.size());
    from_complex(ws.what, out);
}

VelocityState ConvolutionTable::apply(const VelocityState& u, const VelocityState& v) const {
    Workspace ws;
    VelocityState out(basis_->size());
    apply(u, v, out, ws);
    return out;
}

double ConvolutionTable::trilinear(const VelocityState& u1, const VelocityState& u2,
                                   const VelocityState& u3) const {
    return inner_h(u1, apply(u2, u3));
}

}  // namespace sgns
