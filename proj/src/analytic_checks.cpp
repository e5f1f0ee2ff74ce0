#include "sgns/analytic_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace sgns {

namespace {

struct Kernel2 {
    // inverse covariance of N(0, t Sigma), d <= 2
    int d = 1;
    double a = 0.0, b = 0.0, c = 0.0;  // inv = [[a, b], [b, c]] (b unused for d=1)

    static Kernel2 from(const HeatKernelSpec& spec) {
        Kernel2 k;
        k.d = spec.d;
        if (spec.d == 1) {
            const double v = spec.t * spec.covariance[0];
            if (v <= 0.0) throw std::invalid_argument("heat kernel: covariance must be positive");
            k.a = 1.0 / v;
        } else if (spec.d == 2) {
            const double s11 = spec.t * spec.covariance[0];
            const double s12 = spec.t * spec.covariance[1];
            const double s22 = spec.t * spec.covariance[3];
            const double det = s11 * s22 - s12 * s12;
            if (det <= 0.0 || s11 <= 0.0)
                throw std::invalid_argument("heat kernel: covariance must be positive definite");
            k.a = s22 / det;
            k.b = -s12 / det;
            k.c = s11 / det;
        } else {
            throw std::invalid_argument("heat kernel: d must be 1 or 2");
        }
        return k;
    }

    double log_weight(double dx, double dy) const {
        if (d == 1) return -0.5 * a * dx * dx;
        return -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
    }
};

void validate_spec(const GridFunction& phi, const HeatKernelSpec& spec) {
    if (spec.d != phi.grid.d) throw std::invalid_argument("heat_solution: dimension mismatch");
    if (spec.t < 0.0) throw std::invalid_argument("heat_solution: t must be >= 0");
    if (spec.covariance.size() != std::size_t(spec.d) * std::size_t(spec.d))
        throw std::invalid_argument("heat_solution: covariance size mismatch");
    if (spec.d == 2 && std::abs(spec.covariance[1] - spec.covariance[2]) > 1e-12)
        throw std::invalid_argument("heat_solution: covariance must be symmetric");
}

}  // namespace

GridFunction heat_solution(const GridFunction& phi, const HeatKernelSpec& spec) {
    validate_spec(phi, spec);
    if (spec.t == 0.0) return phi;
    const Kernel2 ker = Kernel2::from(spec);
    const int b = phi.grid.bins;
    GridFunction out = GridFunction::zeros(phi.grid);
    const double w = phi.grid.cell_width();

    if (phi.grid.d == 1) {
        // kernel table over offsets
        std::vector<double> table(std::size_t(2 * b - 1));
        for (int o = -(b - 1); o <= b - 1; ++o)
            table[std::size_t(o + b - 1)] = std::exp(ker.log_weight(o * w, 0.0));
        for (int i = 0; i < b; ++i) {
            double num = 0.0, den = 0.0;
            for (int j = 0; j < b; ++j) {
                const double kv = table[std::size_t(j - i + b - 1)];
                num += kv * phi.values[std::size_t(j)];
                den += kv;
            }
            out.values[std::size_t(i)] = num / den;
        }
        return out;
    }

    std::vector<double> table(std::size_t(2 * b - 1) * std::size_t(2 * b - 1));
    for (int ox = -(b - 1); ox <= b - 1; ++ox)
        for (int oy = -(b - 1); oy <= b - 1; ++oy)
            table[std::size_t(ox + b - 1) * std::size_t(2 * b - 1) + std::size_t(oy + b - 1)] =
                std::exp(ker.log_weight(ox * w, oy * w));
    for (int ix = 0; ix < b; ++ix)
        for (int iy = 0; iy < b; ++iy) {
            double num = 0.0, den = 0.0;
            for (int jx = 0; jx < b; ++jx) {
                const double* trow =
                    table.data() + std::size_t(jx - ix + b - 1) * std::size_t(2 * b - 1) +
                    std::size_t(b - 1 - iy);
                const double* prow = phi.values.data() + std::size_t(jx) * std::size_t(b);
                for (int jy = 0; jy < b; ++jy) {
                    num += trow[jy] * prow[jy];
                    den += trow[jy];
                }
            }
            out.values[std::size_t(ix) * std::size_t(b) + std::size_t(iy)] = num / den;
        }
    return out;
}

double heat_solution_at(const GridFunction& phi, const HeatKernelSpec& spec,
                        std::span<const double> point) {
    validate_spec(phi, spec);
    if (point.size() != std::size_t(phi.grid.d))
        throw std::invalid_argument("heat_solution_at: point dimension mismatch");
    const int b = phi.grid.bins;
    if (spec.t == 0.0) {
        // nearest cell value
        long flat = 0;
        for (int a = 0; a < phi.grid.d; ++a) {
            long j = long(std::floor((point[std::size_t(a)] + phi.grid.box_l) / phi.grid.cell_width()));
            j = std::clamp(j, long(0), long(b - 1));
            flat = flat * b + j;
        }
        return phi.values[std::size_t(flat)];
    }
    const Kernel2 ker = Kernel2::from(spec);
    double num = 0.0, den = 0.0;
    if (phi.grid.d == 1) {
        for (int j = 0; j < b; ++j) {
            const double kv = std::exp(ker.log_weight(phi.grid.center(j) - point[0], 0.0));
            num += kv * phi.values[std::size_t(j)];
            den += kv;
        }
    } else {
        for (int jx = 0; jx < b; ++jx)
            for (int jy = 0; jy < b; ++jy) {
                const double kv = std::exp(
                    ker.log_weight(phi.grid.center(jx) - point[0], phi.grid.center(jy) - point[1]));
                num += kv * phi.values[std::size_t(jx) * std::size_t(b) + std::size_t(jy)];
                den += kv;
            }
    }
    return den > 0.0 ? num / den : 0.0;
}

MarkovRepReport markov_rep_check(std::span<const double> log_g_s, const ProjSamples& v_at_t,
                                 const ProjSamples& v_at_s,
                                 const std::function<double(std::span<const double>)>& phi,
                                 const GridFunction& phi_grid, const HeatKernelSpec& heat) {
    const std::size_t n = log_g_s.size();
    if (v_at_t.count != n || v_at_s.count != n || n < 2)
        throw std::invalid_argument("markov_rep_check: ensemble mismatch");
    std::vector<double> diff(n);
    double sum_l = 0.0, sum_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = std::exp(log_g_s[i]);
        const double lhs_i = g * phi(v_at_t.row(i));
        // at zero elapsed time the semigroup is the identity on test functions
        const double rhs_i = heat.t == 0.0 ? g * phi(v_at_s.row(i))
                                           : g * heat_solution_at(phi_grid, heat, v_at_s.row(i));
        diff[i] = lhs_i - rhs_i;
        sum_l += lhs_i;
        sum_r += rhs_i;
    }
    MarkovRepReport r;
    r.lhs = sum_l / double(n);
    r.rhs = sum_r / double(n);
    const double mean_d = (sum_l - sum_r) / double(n);
    double var = 0.0;
    for (double v : diff) var += (v - mean_d) * (v - mean_d);
    r.gap = mean_d;
    r.stderr_ = std::sqrt(var / (double(n) - 1.0) / double(n));
    return r;
}

double pointwise_difference(const std::function<double(std::span<const double>)>& phi,
                            std::span<const double> x, std::span<const double> h, int n) {
    std::vector<double> binom(std::size_t(n) + 1, 0.0);
    binom[0] = 1.0;
    for (int i = 1; i <= n; ++i)
        for (int j = i; j >= 1; --j) binom[std::size_t(j)] += binom[std::size_t(j) - 1];
    std::vector<double> y(x.size());
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
        for (std::size_t a = 0; a < x.size(); ++a) y[a] = x[a] + double(j) * h[a];
        const double sign = ((n - j) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * binom[std::size_t(j)] * phi(y);
    }
    return acc;
}

BrownianDiffReport brownian_diff_check(std::span<const double> a, double r, double s,
                                       std::span<const double> h, int n,
                                       const std::function<double(std::span<const double>)>& phi,
                                       double phi_sup, std::span<const double> q_diag,
                                       std::size_t samples, std::uint64_t seed) {
    const std::size_t d = a.size();
    if (h.size() != d || q_diag.size() != d)
        throw std::invalid_argument("brownian_diff_check: dimension mismatch");
    if (r < 0.0 || s < 0.0) throw std::invalid_argument("brownian_diff_check: r,s must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sr = std::sqrt(r), ss = std::sqrt(s);
    std::vector<double> xr(d), xs(d), z(d);
    double sum = 0.0;
    std::vector<double> vals(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t k = 0; k < d; ++k) z[k] = normal(rng);
        for (std::size_t k = 0; k < d; ++k) {
            xr[k] = a[k] + sr * q_diag[k] * z[k];
            xs[k] = a[k] + ss * q_diag[k] * z[k];
        }
        vals[i] = pointwise_difference(phi, xr, h, n) - pointwise_difference(phi, xs, h, n);
        sum += vals[i];
    }
    BrownianDiffReport rep;
    const double mean = sum / double(samples);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    rep.lhs = std::abs(mean);
    rep.stderr_ = std::sqrt(var / (double(samples) - 1.0) / double(samples));

    double h_len = 0.0;
    for (double c : h) h_len += c * c;
    h_len = std::sqrt(h_len);
    const double lo = std::min(r, s), hi = std::max(r, s);
    rep.bound_shape = lo > 0.0 && hi > 0.0
                          ? phi_sup * std::pow(h_len / std::sqrt(lo), double(n)) * std::abs(r - s) / hi
                          : 0.0;
    return rep;
}

double truncation_bound(std::span<const double> eps_grid, double c_fit, double T, double x0_norm,
                        double p_tau) {
    if (eps_grid.empty()) throw std::invalid_argument("truncation_bound: empty eps grid");
    const double amp = 1.0 + x0_norm * x0_norm;
    double best = std::numeric_limits<double>::infinity();
    for (double eps : eps_grid) {
        if (eps <= 0.0) throw std::invalid_argument("truncation_bound: eps must be positive");
        const double v = eps * (c_fit * std::sqrt(T) * amp * amp + std::exp(2.0 / eps) * p_tau);
        best = std::min(best, v);
    }
    return best;
}

}  // namespace sgns
