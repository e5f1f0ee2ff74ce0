#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "sgns/spectral_basis.hpp"

using namespace sgns;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent physical-space oracle: evaluate fields by direct trigonometric
// summation on an N^3 quadrature grid, form (u . grad) v pointwise, then
// extract coefficients by quadrature against each basis field. Exact for
// trigonometric polynomials when N >= 3K + 1.

Vec3d eval_field(const FourierBasis& basis, const VelocityState& u, const Vec3d& x) {
    Vec3d out{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < basis.size(); ++i) {
        if (u.c[i] == 0.0) continue;
        Vec3d e = basis.evaluate_element(i, x);
        for (int a = 0; a < 3; ++a) out[a] += u.c[i] * e[a];
    }
    return out;
}

// gradient of component a of element i: d_b (e_i)_a
std::array<Vec3d, 3> eval_element_grad(const FourierBasis& basis, std::size_t i, const Vec3d& x) {
    const BasisElement& e = basis.element(i);
    const double norm = std::sqrt(2.0 / (kTwoPi * kTwoPi * kTwoPi));
    const double phase = e.wavevector[0] * x[0] + e.wavevector[1] * x[1] + e.wavevector[2] * x[2];
    const double dtrig = (e.parity == Parity::Cosine) ? -std::sin(phase) : std::cos(phase);
    std::array<Vec3d, 3> grad{};  // grad[a][b] = d_b (e_i)_a
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            grad[std::size_t(a)][std::size_t(b)] =
                norm * dtrig * double(e.wavevector[std::size_t(b)]) * e.pol_vector[std::size_t(a)];
    return grad;
}

VelocityState advection_oracle(const FourierBasis& basis, const VelocityState& u,
                               const VelocityState& v, int ngrid) {
    std::vector<Vec3d> pts;
    for (int ix = 0; ix < ngrid; ++ix)
        for (int iy = 0; iy < ngrid; ++iy)
            for (int iz = 0; iz < ngrid; ++iz)
                pts.push_back({kTwoPi * ix / ngrid, kTwoPi * iy / ngrid, kTwoPi * iz / ngrid});

    // w(x) = (u . grad) v at every quadrature point
    std::vector<Vec3d> w(pts.size(), {0.0, 0.0, 0.0});
    for (std::size_t p = 0; p < pts.size(); ++p) {
        Vec3d uval = eval_field(basis, u, pts[p]);
        for (std::size_t i = 0; i < basis.size(); ++i) {
            if (v.c[i] == 0.0) continue;
            auto grad = eval_element_grad(basis, i, pts[p]);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    w[p][std::size_t(a)] +=
                        v.c[i] * uval[std::size_t(b)] * grad[std::size_t(a)][std::size_t(b)];
        }
    }

    // project on the basis: quadrature of <w, e_i>; the basis fields are
    // divergence free, so this realizes the Leray projection and truncation
    VelocityState out(basis.size());
    const double cell = kTwoPi * kTwoPi * kTwoPi / double(pts.size());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            Vec3d e = basis.evaluate_element(i, pts[p]);
            acc += w[p][0] * e[0] + w[p][1] * e[1] + w[p][2] * e[2];
        }
        out.c[i] = acc * cell;
    }
    return out;
}

}  // namespace

TEST_CASE("basis enumeration at K=1") {
    FourierBasis b = FourierBasis::build(1);
    CHECK(b.canonical_count() == 13);
    CHECK(b.size() == 52);
    for (const auto& e : b.elements()) {
        CHECK(linf_norm(e.wavevector) <= 1);
        CHECK(!is_zero(e.wavevector));
        CHECK(e.eigenvalue == doctest::Approx(double(e.wavevector[0] * e.wavevector[0] +
                                                     e.wavevector[1] * e.wavevector[1] +
                                                     e.wavevector[2] * e.wavevector[2])));
    }
    // sorted by eigenvalue, ties by wavevector
    for (std::size_t i = 1; i < b.size(); ++i)
        CHECK(b.element(i - 1).eigenvalue <= b.element(i).eigenvalue);
    CHECK_THROWS(FourierBasis::build(0));
}

TEST_CASE("axis wavevector polarization pair") {
    FourierBasis b = FourierBasis::build(1);
    bool found = false;
    for (std::size_t ci = 0; ci < b.canonical_count(); ++ci) {
        if (b.canonical(ci) == Vec3i{1, 0, 0}) {
            found = true;
            const Vec3d e1 = b.pol_vector(ci, 1);
            const Vec3d e2 = b.pol_vector(ci, 2);
            CHECK(e1 == Vec3d{0.0, 1.0, 0.0});
            CHECK(e2 == Vec3d{0.0, 0.0, 1.0});
        }
    }
    CHECK(found);
    // all polarization pairs are orthonormal and orthogonal to k
    for (const auto& e : b.elements()) {
        const Vec3d kd{double(e.wavevector[0]), double(e.wavevector[1]), double(e.wavevector[2])};
        CHECK(std::abs(dot(e.pol_vector, kd)) < 1e-14);
        CHECK(dot(e.pol_vector, e.pol_vector) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("gram matrix by quadrature is the identity") {
    for (int K : {1, 2}) {
        FourierBasis b = FourierBasis::build(K);
        const int n = 16;
        std::vector<Vec3d> pts;
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy)
                for (int iz = 0; iz < n; ++iz)
                    pts.push_back({kTwoPi * ix / n, kTwoPi * iy / n, kTwoPi * iz / n});
        // field matrix, then G = F F^T * cell volume
        const std::size_t m = b.size();
        std::vector<double> fields(m * pts.size() * 3);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < pts.size(); ++p) {
                Vec3d e = b.evaluate_element(i, pts[p]);
                for (int a = 0; a < 3; ++a) fields[(i * pts.size() + p) * 3 + std::size_t(a)] = e[a];
            }
        const double cell = kTwoPi * kTwoPi * kTwoPi / double(pts.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                double g = 0.0;
                const double* fi = fields.data() + i * pts.size() * 3;
                const double* fj = fields.data() + j * pts.size() * 3;
                for (std::size_t p = 0; p < pts.size() * 3; ++p) g += fi[p] * fj[p];
                g *= cell;
                worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
            }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("leray projection examples") {
    using A3 = std::array<Cplx, 3>;
    A3 r1 = leray_project({1, 0, 0}, A3{Cplx(1), Cplx(0), Cplx(0)});
    CHECK(std::abs(r1[0]) < 1e-15);
    CHECK(std::abs(r1[1]) < 1e-15);
    CHECK(std::abs(r1[2]) < 1e-15);

    A3 r2 = leray_project({1, 0, 0}, A3{Cplx(0), Cplx(1), Cplx(0)});
    CHECK(std::abs(r2[1] - Cplx(1)) < 1e-15);

    A3 r3 = leray_project({1, 1, 0}, A3{Cplx(1), Cplx(0), Cplx(0)});
    CHECK(std::abs(r3[0] - Cplx(0.5)) < 1e-15);
    CHECK(std::abs(r3[1] - Cplx(-0.5)) < 1e-15);
    CHECK(std::abs(r3[2]) < 1e-15);

    CHECK_THROWS(leray_project({0, 0, 0}, A3{Cplx(1), Cplx(0), Cplx(0)}));
}

TEST_CASE("stokes operator scales by the eigenvalue") {
    FourierBasis b = FourierBasis::build(2);
    VelocityState u(b.size());
    // unit coefficient on a (1,0,0) element and on a (2,1,0) element
    std::size_t i1 = b.size(), i5 = b.size();
    for (const auto& e : b.elements()) {
        if (e.wavevector == Vec3i{1, 0, 0} && i1 == b.size()) i1 = std::size_t(e.index);
        if (e.wavevector == Vec3i{2, 1, 0} && i5 == b.size()) i5 = std::size_t(e.index);
    }
    REQUIRE(i1 < b.size());
    REQUIRE(i5 < b.size());
    u.c[i1] = 1.0;
    u.c[i5] = 1.0;
    VelocityState au = stokes_apply(b, u);
    CHECK(au.c[i1] == doctest::Approx(1.0));
    CHECK(au.c[i5] == doctest::Approx(5.0));

    VelocityState z(b.size());
    VelocityState az = stokes_apply(b, z);
    CHECK(norm_h(az) == 0.0);
}

TEST_CASE("bilinear term: zero and single-mode cases") {
    FourierBasis b = FourierBasis::build(1);
    ConvolutionTable conv(b);
    std::mt19937_64 rng(7);
    VelocityState z(b.size());
    VelocityState v = random_state(b, rng);
    CHECK(norm_h(conv.apply(z, v)) == 0.0);
    CHECK(norm_h(conv.apply(v, z)) == 0.0);

    // a single shear mode advects itself nowhere
    for (std::size_t i : {std::size_t(0), std::size_t(5), std::size_t(17)}) {
        VelocityState u(b.size());
        u.c[i] = 1.3;
        CHECK(norm_h(conv.apply(u, u)) < 1e-14);
    }
}

TEST_CASE("trilinear antisymmetry and energy neutrality") {
    FourierBasis b = FourierBasis::build(2);
    ConvolutionTable conv(b);
    std::mt19937_64 rng(11);
    double worst_anti = 0.0, worst_energy = 0.0;
    for (int r = 0; r < 200; ++r) {
        VelocityState u1 = random_state(b, rng);
        VelocityState u2 = random_state(b, rng);
        VelocityState u3 = random_state(b, rng);
        const double t1 = conv.trilinear(u1, u2, u3);
        const double t2 = conv.trilinear(u3, u2, u1);
        worst_anti = std::max(worst_anti, std::abs(t1 + t2) / std::max(std::abs(t1), std::abs(t2)));
        const double e = std::abs(conv.trilinear(u1, u1, u1)) / std::pow(norm_h(u1), 3);
        worst_energy = std::max(worst_energy, e);
    }
    CHECK(worst_anti < 1e-10);
    CHECK(worst_energy < 1e-10);

    VelocityState z(b.size());
    std::mt19937_64 rng2(3);
    VelocityState u = random_state(b, rng2);
    CHECK(conv.trilinear(z, u, u) == 0.0);
    CHECK(conv.trilinear(u, z, u) == 0.0);
    CHECK(conv.trilinear(u, u, z) == 0.0);
}

TEST_CASE("mode convolution agrees with the physical-space oracle") {
    for (int K : {1, 2}) {
        FourierBasis b = FourierBasis::build(K);
        ConvolutionTable conv(b);
        std::mt19937_64 rng(100 + std::uint64_t(K));
        VelocityState u = random_state(b, rng);
        VelocityState v = random_state(b, rng);
        VelocityState fast = conv.apply(u, v);
        VelocityState slow = advection_oracle(b, u, v, 3 * K + 2);
        double num = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i)
            num = std::max(num, std::abs(fast.c[i] - slow.c[i]));
        CHECK(num / norm_h(fast) < 1e-8);
    }
}

TEST_CASE("states reconstruct to divergence-free fields") {
    FourierBasis b = FourierBasis::build(2);
    std::mt19937_64 rng(23);
    VelocityState u = random_state(b, rng);
    std::uniform_real_distribution<double> unif(0.0, kTwoPi);
    const double h = 1e-5;
    for (int p = 0; p < 20; ++p) {
        Vec3d x{unif(rng), unif(rng), unif(rng)};
        double div = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3d xp = x, xm = x;
            xp[std::size_t(axis)] += h;
            xm[std::size_t(axis)] -= h;
            div += (eval_field(b, u, xp)[std::size_t(axis)] -
                    eval_field(b, u, xm)[std::size_t(axis)]) /
                   (2.0 * h);
        }
        CHECK(std::abs(div) < 1e-6 * norm_h(u));
    }
}
