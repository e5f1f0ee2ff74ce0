#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgns/integrator.hpp"
#include "sgns/noise_model.hpp"

namespace sgns {

/// Rows of d-dimensional sample points (F-coordinates of an ensemble).
struct ProjSamples {
    int d = 0;
    std::size_t count = 0;
    std::vector<double> xy;  // count x d, row-major

    std::span<const double> row(std::size_t i) const { return {xy.data() + i * std::size_t(d), std::size_t(d)}; }
};

/// F-coordinates of every trajectory at a grid time t (no interpolation).
ProjSamples project_ensemble(std::span<const Trajectory> trajectories, const SubspaceF& f_space,
                             double t, double dt);

/// Uniform grid on [-L, L]^d with `bins` cells per axis.
struct GridSpec {
    int d = 1;
    double box_l = 1.0;
    int bins = 1;

    double cell_width() const { return 2.0 * box_l / double(bins); }
    double cell_volume() const;
    std::size_t cells() const;
    double center(int axis_index) const { return -box_l + (double(axis_index) + 0.5) * cell_width(); }
    bool matches(const GridSpec& o) const;
};

struct GridFunction {
    GridSpec grid;
    std::vector<double> values;

    static GridFunction zeros(const GridSpec& g);
};

/// Normalized histogram: nonnegative, in-box mass exactly 1.
struct DensityEstimate {
    GridFunction fn;
    std::size_t sample_count = 0;
    double out_of_box_fraction = 0.0;
};

/// Fails when the out-of-box fraction reaches 1% (box too small).
DensityEstimate estimate_density(const ProjSamples& samples, double box_l, int bins);

/// Merge factor x factor blocks (bins must be divisible); exact mass-preserving
/// coarsening, used to compare distances across nested grids.
DensityEstimate coarsen(const DensityEstimate& f, int factor);

double l1_norm(const GridFunction& f);
double l1_distance(const GridFunction& f, const GridFunction& g);
double l1_distance(const DensityEstimate& f, const DensityEstimate& g);

/// n-th order forward difference with shift h given in integer cells per
/// axis; values outside the box read as zero. Result lives on the same grid.
GridFunction finite_difference(const GridFunction& f, std::span<const int> h_cells, int n);

/// L1 norm of the n-th difference over the full (extended) support.
double finite_difference_l1(const GridFunction& f, std::span<const int> h_cells, int n);

struct Shift {
    std::vector<int> cells;
    double length = 0.0;  // Euclidean |h|
};

/// Log-spaced integer shifts from one cell width up to |h| <= 1 along each
/// axis direction (>= per_direction values when the grid allows), plus the
/// two diagonal directions for d = 2.
std::vector<Shift> make_shift_set(const GridSpec& grid, int per_direction = 12);

/// max over shifts of |Delta_h^n f|_L1 / |h|^alpha. Requires 0 < alpha < 1
/// and integer n > alpha.
double besov_seminorm(const GridFunction& f, double alpha, int n, std::span<const Shift> shifts);

/// L1 distance plus the seminorm of the difference.
double besov_distance(const GridFunction& f, const GridFunction& g, double alpha, int n,
                      std::span<const Shift> shifts);
double besov_distance(const DensityEstimate& f, const DensityEstimate& g, double alpha, int n,
                      std::span<const Shift> shifts);

/// Convolution with a compactly supported bump of radius eps (>= one cell
/// width), renormalized to unit mass.
DensityEstimate mollify(const DensityEstimate& f, double eps);
GridFunction mollify(const GridFunction& f, double eps);

struct IbpReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double scale = 0.0;  // |f|_1 |phi|_inf
};

/// Discrete duality identity: integral of Delta_h^n phi . f equals integral
/// of Delta_{-h}^n f . phi when phi is supported n|h| inside the box.
IbpReport discrete_ibp_check(const GridFunction& f, const GridFunction& phi,
                             std::span<const int> h_cells, int n);

struct HoelderFit {
    std::vector<double> gaps;
    std::vector<double> distances;
    std::vector<char> used;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double noise_floor = 0.0;
};

/// Least-squares slope of log(distance) against log(gap), excluding pairs at
/// or below the noise floor. Needs >= 6 gaps spanning a decade and at least
/// 4 usable pairs.
HoelderFit hoelder_fit(std::span<const double> gaps, std::span<const double> distances,
                       double noise_floor);

void write_density_csv(const std::string& path, const DensityEstimate& f);
void write_fit_points_csv(const std::string& path, const HoelderFit& fit);

}  // namespace sgns
