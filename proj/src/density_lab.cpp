#include "sgns/density_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sgns/csv.hpp"

namespace sgns {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

std::vector<double> binomial_row(int n) {
    std::vector<double> c(std::size_t(n) + 1, 0.0);
    c[0] = 1.0;
    for (int i = 1; i <= n; ++i)
        for (int j = i; j >= 1; --j) c[std::size_t(j)] += c[std::size_t(j) - 1];
    return c;
}

}  // namespace

ProjSamples project_ensemble(std::span<const Trajectory> trajectories, const SubspaceF& f_space,
                             double t, double dt) {
    ProjSamples out;
    out.d = f_space.dim();
    out.count = trajectories.size();
    out.xy.resize(out.count * std::size_t(out.d));
    const auto k = std::size_t(std::llround(t / dt));
    if (std::abs(double(k) * dt - t) > 1e-9 * std::max(1.0, t))
        throw std::invalid_argument("project_ensemble: t is not on the time grid");
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const Trajectory& tr = trajectories[i];
        if (k >= tr.states.size())
            throw std::invalid_argument("project_ensemble: t beyond trajectory");
        for (int j = 0; j < out.d; ++j)
            out.xy[i * std::size_t(out.d) + std::size_t(j)] =
                tr.states[k].c[std::size_t(f_space.indices[std::size_t(j)])];
    }
    return out;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < d; ++a) v *= cell_width();
    return v;
}

std::size_t GridSpec::cells() const {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) n *= std::size_t(bins);
    return n;
}

bool GridSpec::matches(const GridSpec& o) const {
    return d == o.d && bins == o.bins && std::abs(box_l - o.box_l) <= 1e-12 * std::max(1.0, box_l);
}

GridFunction GridFunction::zeros(const GridSpec& g) { return {g, std::vector<double>(g.cells(), 0.0)}; }

DensityEstimate estimate_density(const ProjSamples& samples, double box_l, int bins) {
    require(samples.count >= 1000, "estimate_density: needs at least 1000 samples");
    require(samples.d == 1 || samples.d == 2, "estimate_density: d must be 1 or 2");
    require(box_l > 0.0 && bins >= 1, "estimate_density: bad grid");

    DensityEstimate de;
    de.fn.grid = {samples.d, box_l, bins};
    de.fn.values.assign(de.fn.grid.cells(), 0.0);
    de.sample_count = samples.count;

    const double w = de.fn.grid.cell_width();
    std::size_t inside = 0;
    for (std::size_t i = 0; i < samples.count; ++i) {
        auto r = samples.row(i);
        long flat = 0;
        bool in = true;
        for (int a = 0; a < samples.d; ++a) {
            long j = long(std::floor((r[std::size_t(a)] + box_l) / w));
            if (j < 0 || j >= bins) {
                in = false;
                break;
            }
            flat = flat * bins + j;
        }
        if (in) {
            de.fn.values[std::size_t(flat)] += 1.0;
            ++inside;
        }
    }
    de.out_of_box_fraction = 1.0 - double(inside) / double(samples.count);
    if (de.out_of_box_fraction >= 0.01)
        throw std::runtime_error("estimate_density: more than 1% of samples out of box");

    const double scale = 1.0 / (double(inside) * de.fn.grid.cell_volume());
    for (double& v : de.fn.values) v *= scale;
    return de;
}

DensityEstimate coarsen(const DensityEstimate& f, int factor) {
    require(factor >= 1 && f.fn.grid.bins % factor == 0, "coarsen: factor must divide bins");
    DensityEstimate out;
    out.sample_count = f.sample_count;
    out.out_of_box_fraction = f.out_of_box_fraction;
    out.fn.grid = {f.fn.grid.d, f.fn.grid.box_l, f.fn.grid.bins / factor};
    out.fn.values.assign(out.fn.grid.cells(), 0.0);
    const int bf = f.fn.grid.bins;
    const int bc = out.fn.grid.bins;
    const double inv = f.fn.grid.d == 1 ? 1.0 / factor : 1.0 / double(factor) / double(factor);
    if (f.fn.grid.d == 1) {
        for (int j = 0; j < bf; ++j) out.fn.values[std::size_t(j / factor)] += f.fn.values[std::size_t(j)] * inv;
    } else {
        for (int jx = 0; jx < bf; ++jx)
            for (int jy = 0; jy < bf; ++jy)
                out.fn.values[std::size_t(jx / factor) * std::size_t(bc) + std::size_t(jy / factor)] +=
                    f.fn.values[std::size_t(jx) * std::size_t(bf) + std::size_t(jy)] * inv;
    }
    return out;
}

double l1_norm(const GridFunction& f) {
    double s = 0.0;
    for (double v : f.values) s += std::abs(v);
    return s * f.grid.cell_volume();
}

double l1_distance(const GridFunction& f, const GridFunction& g) {
    require(f.grid.matches(g.grid), "l1_distance: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) s += std::abs(f.values[i] - g.values[i]);
    return s * f.grid.cell_volume();
}

double l1_distance(const DensityEstimate& f, const DensityEstimate& g) {
    return l1_distance(f.fn, g.fn);
}

namespace {

// f read with zero extension; index may lie outside [0, bins)^d
inline double read_ext(const GridFunction& f, long ix, long iy) {
    const int b = f.grid.bins;
    if (ix < 0 || ix >= b) return 0.0;
    if (f.grid.d == 1) return f.values[std::size_t(ix)];
    if (iy < 0 || iy >= b) return 0.0;
    return f.values[std::size_t(ix) * std::size_t(b) + std::size_t(iy)];
}

void check_shift(const GridFunction& f, std::span<const int> h_cells) {
    require(int(h_cells.size()) == f.grid.d, "finite_difference: shift dimension mismatch");
    double len2 = 0.0;
    for (int a = 0; a < f.grid.d; ++a) {
        const double ha = h_cells[std::size_t(a)] * f.grid.cell_width();
        len2 += ha * ha;
    }
    require(len2 > 0.0, "finite_difference: zero shift");
    require(len2 <= 1.0 + 1e-9, "finite_difference: |h| must be <= 1");
}

}  // namespace

GridFunction finite_difference(const GridFunction& f, std::span<const int> h_cells, int n) {
    require(n >= 1, "finite_difference: n must be >= 1");
    check_shift(f, h_cells);
    const auto binom = binomial_row(n);
    GridFunction out = GridFunction::zeros(f.grid);
    const int b = f.grid.bins;
    const int hx = h_cells[0];
    const int hy = f.grid.d == 2 ? h_cells[1] : 0;
    for (int ix = 0; ix < b; ++ix) {
        const int ny = f.grid.d == 2 ? b : 1;
        for (int iy = 0; iy < ny; ++iy) {
            double acc = 0.0;
            for (int j = 0; j <= n; ++j) {
                const double sign = ((n - j) % 2 == 0) ? 1.0 : -1.0;
                acc += sign * binom[std::size_t(j)] * read_ext(f, ix + long(j) * hx, iy + long(j) * hy);
            }
            out.values[f.grid.d == 1 ? std::size_t(ix) : std::size_t(ix) * std::size_t(b) + std::size_t(iy)] = acc;
        }
    }
    return out;
}

double finite_difference_l1(const GridFunction& f, std::span<const int> h_cells, int n) {
    require(n >= 1, "finite_difference_l1: n must be >= 1");
    check_shift(f, h_cells);
    const auto binom = binomial_row(n);
    const int b = f.grid.bins;
    const int hx = h_cells[0];
    const int hy = f.grid.d == 2 ? h_cells[1] : 0;
    const long lox = hx > 0 ? -long(n) * hx : 0;
    const long hix = hx < 0 ? b - long(n) * hx : b;
    long loy = 0, hiy = 1;
    if (f.grid.d == 2) {
        loy = hy > 0 ? -long(n) * hy : 0;
        hiy = hy < 0 ? b - long(n) * hy : b;
    }
    double s = 0.0;
    for (long ix = lox; ix < hix; ++ix)
        for (long iy = loy; iy < hiy; ++iy) {
            double acc = 0.0;
            for (int j = 0; j <= n; ++j) {
                const double sign = ((n - j) % 2 == 0) ? 1.0 : -1.0;
                acc += sign * binom[std::size_t(j)] * read_ext(f, ix + long(j) * hx, iy + long(j) * hy);
            }
            s += std::abs(acc);
        }
    return s * f.grid.cell_volume();
}

std::vector<Shift> make_shift_set(const GridSpec& grid, int per_direction) {
    std::vector<std::vector<int>> dirs;
    if (grid.d == 1) {
        dirs = {{1}};
    } else {
        dirs = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    }
    const double w = grid.cell_width();
    std::vector<Shift> shifts;
    for (const auto& dir : dirs) {
        double dlen = 0.0;
        for (int c : dir) dlen += double(c) * c;
        dlen = std::sqrt(dlen);
        const int m_max = std::max(1, int(std::floor(1.0 / (w * dlen))));
        std::vector<int> ms;
        if (m_max <= per_direction) {
            for (int m = 1; m <= m_max; ++m) ms.push_back(m);
        } else {
            for (int i = 0; i < per_direction; ++i) {
                const double t = double(i) / double(per_direction - 1);
                int m = int(std::lround(std::pow(double(m_max), t)));
                m = std::clamp(m, 1, m_max);
                if (ms.empty() || ms.back() != m) ms.push_back(m);
            }
            // fill gaps until the requested count is reached
            for (int m = 1; int(ms.size()) < per_direction && m <= m_max; ++m)
                if (std::find(ms.begin(), ms.end(), m) == ms.end()) ms.push_back(m);
            std::sort(ms.begin(), ms.end());
        }
        for (int m : ms) {
            Shift s;
            for (int c : dir) s.cells.push_back(m * c);
            s.length = m * dlen * w;
            shifts.push_back(std::move(s));
        }
    }
    return shifts;
}

double besov_seminorm(const GridFunction& f, double alpha, int n, std::span<const Shift> shifts) {
    require(alpha > 0.0 && alpha < 1.0, "besov_seminorm: alpha must be in (0,1)");
    require(double(n) > alpha, "besov_seminorm: n must exceed alpha");
    require(!shifts.empty(), "besov_seminorm: empty shift set");
    double sup = 0.0;
    for (const Shift& s : shifts) {
        const double v = finite_difference_l1(f, s.cells, n) / std::pow(s.length, alpha);
        sup = std::max(sup, v);
    }
    return sup;
}

double besov_distance(const GridFunction& f, const GridFunction& g, double alpha, int n,
                      std::span<const Shift> shifts) {
    require(f.grid.matches(g.grid), "besov_distance: grid mismatch");
    GridFunction diff = GridFunction::zeros(f.grid);
    for (std::size_t i = 0; i < f.values.size(); ++i) diff.values[i] = f.values[i] - g.values[i];
    return l1_distance(f, g) + besov_seminorm(diff, alpha, n, shifts);
}

double besov_distance(const DensityEstimate& f, const DensityEstimate& g, double alpha, int n,
                      std::span<const Shift> shifts) {
    return besov_distance(f.fn, g.fn, alpha, n, shifts);
}

namespace {

// Rotationally symmetric bump exp(-1/(1-(r/eps)^2)) sampled at cell centers.
std::vector<std::pair<std::vector<int>, double>> bump_kernel(const GridSpec& grid, double eps) {
    const double w = grid.cell_width();
    const int r = int(std::floor(eps / w + 1e-12));
    std::vector<std::pair<std::vector<int>, double>> k;
    double total = 0.0;
    auto weight = [&](double rho2) {
        if (rho2 >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - rho2));
    };
    if (grid.d == 1) {
        for (int i = -r; i <= r; ++i) {
            const double v = weight((i * w) * (i * w) / (eps * eps));
            if (v > 0.0) {
                k.push_back({{i}, v});
                total += v;
            }
        }
    } else {
        for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j) {
                const double v = weight(((i * w) * (i * w) + (j * w) * (j * w)) / (eps * eps));
                if (v > 0.0) {
                    k.push_back({{i, j}, v});
                    total += v;
                }
            }
    }
    for (auto& e : k) e.second /= total;
    return k;
}

}  // namespace

GridFunction mollify(const GridFunction& f, double eps) {
    require(eps >= f.grid.cell_width() * (1.0 - 1e-12), "mollify: eps must be >= one cell width");
    const auto kernel = bump_kernel(f.grid, eps);
    GridFunction out = GridFunction::zeros(f.grid);
    const int b = f.grid.bins;
    for (int ix = 0; ix < b; ++ix) {
        const int ny = f.grid.d == 2 ? b : 1;
        for (int iy = 0; iy < ny; ++iy) {
            double acc = 0.0;
            for (const auto& [off, kw] : kernel)
                acc += kw * read_ext(f, ix - off[0], iy - (f.grid.d == 2 ? off[1] : 0));
            out.values[f.grid.d == 1 ? std::size_t(ix) : std::size_t(ix) * std::size_t(b) + std::size_t(iy)] = acc;
        }
    }
    return out;
}

DensityEstimate mollify(const DensityEstimate& f, double eps) {
    DensityEstimate out;
    out.sample_count = f.sample_count;
    out.out_of_box_fraction = f.out_of_box_fraction;
    out.fn = mollify(f.fn, eps);
    // renormalize: convolution leaks a little mass through the box boundary
    const double mass = std::accumulate(out.fn.values.begin(), out.fn.values.end(), 0.0) *
                        out.fn.grid.cell_volume();
    if (mass > 0.0)
        for (double& v : out.fn.values) v /= mass;
    return out;
}

IbpReport discrete_ibp_check(const GridFunction& f, const GridFunction& phi,
                             std::span<const int> h_cells, int n) {
    require(f.grid.matches(phi.grid), "discrete_ibp_check: grid mismatch");
    // phi must vanish within n|h| of the boundary
    const int b = f.grid.bins;
    for (int ix = 0; ix < b; ++ix) {
        const int ny = f.grid.d == 2 ? b : 1;
        for (int iy = 0; iy < ny; ++iy) {
            const double v =
                phi.values[f.grid.d == 1 ? std::size_t(ix) : std::size_t(ix) * std::size_t(b) + std::size_t(iy)];
            if (v == 0.0) continue;
            for (int a = 0; a < f.grid.d; ++a) {
                const int pos = a == 0 ? ix : iy;
                const int margin = n * std::abs(h_cells[std::size_t(a)]);
                require(pos >= margin && pos < b - margin,
                        "discrete_ibp_check: phi support too close to the boundary");
            }
        }
    }

    GridFunction dphi = finite_difference(phi, h_cells, n);
    std::vector<int> neg(h_cells.begin(), h_cells.end());
    for (int& c : neg) c = -c;
    GridFunction df = finite_difference(f, neg, n);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        lhs += dphi.values[i] * f.values[i];
        rhs += df.values[i] * phi.values[i];
    }
    lhs *= f.grid.cell_volume();
    rhs *= f.grid.cell_volume();

    double phi_max = 0.0;
    for (double v : phi.values) phi_max = std::max(phi_max, std::abs(v));
    return {lhs, rhs, std::abs(lhs - rhs), l1_norm(f) * phi_max};
}

HoelderFit hoelder_fit(std::span<const double> gaps, std::span<const double> distances,
                       double noise_floor) {
    require(gaps.size() == distances.size(), "hoelder_fit: size mismatch");
    require(gaps.size() >= 6, "hoelder_fit: needs at least 6 gaps");
    double gmin = gaps[0], gmax = gaps[0];
    for (double g : gaps) {
        require(g > 0.0, "hoelder_fit: gaps must be positive");
        gmin = std::min(gmin, g);
        gmax = std::max(gmax, g);
    }
    require(gmax / gmin >= 10.0 * (1.0 - 1e-9), "hoelder_fit: gaps must span a decade");

    HoelderFit fit;
    fit.noise_floor = noise_floor;
    fit.gaps.assign(gaps.begin(), gaps.end());
    fit.distances.assign(distances.begin(), distances.end());
    fit.used.assign(gaps.size(), 0);

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        if (distances[i] > noise_floor && distances[i] > 0.0) {
            fit.used[i] = 1;
            lx.push_back(std::log(gaps[i]));
            ly.push_back(std::log(distances[i]));
        }
    }
    if (lx.size() < 4) throw std::runtime_error("hoelder_fit: fewer than 4 usable pairs");

    const double n = double(lx.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy < 1e-30 ? 1.0 : 1.0 - ss_res / syy;
    return fit;
}

void write_density_csv(const std::string& path, const DensityEstimate& f) {
    CsvWriter csv(path);
    if (f.fn.grid.d == 1) {
        csv.header({"x", "value"});
        for (int i = 0; i < f.fn.grid.bins; ++i)
            csv.row({f.fn.grid.center(i), f.fn.values[std::size_t(i)]});
    } else {
        csv.header({"x", "y", "value"});
        for (int i = 0; i < f.fn.grid.bins; ++i)
            for (int j = 0; j < f.fn.grid.bins; ++j)
                csv.row({f.fn.grid.center(i), f.fn.grid.center(j),
                         f.fn.values[std::size_t(i) * std::size_t(f.fn.grid.bins) + std::size_t(j)]});
    }
}

void write_fit_points_csv(const std::string& path, const HoelderFit& fit) {
    CsvWriter csv(path);
    csv.header({"gap", "distance", "used_flag"});
    for (std::size_t i = 0; i < fit.gaps.size(); ++i)
        csv.row({fit.gaps[i], fit.distances[i], double(fit.used[i])});
}

}  // namespace sgns
