#pragma once

#include "cwp/free_energy.hpp"
#include "cwp/model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace cwp {

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int points = 1;

    double spacing() const { return points > 1 ? (hi - lo) / (points - 1) : 1.0; }
    double at(int k) const { return lo + spacing() * k; }
};

// Regular lattice; the first axis varies slowest in the flat storage order.
struct GridSpec {
    std::vector<GridAxis> axes;

    std::size_t size() const;
    double cell_volume() const;
    bool operator==(const GridSpec& other) const;

    // Same bounds, spacing divided by two.
    GridSpec refined() const;
};

struct HSGrid {
    double gamma = 0.5;
    Eigen::VectorXd m;
    GridSpec grid;
    std::vector<double> density;

    double mass() const;
};

// Density of Y n^{gamma - 1/2} + n^gamma (L_n - m), Y ~ N(0, I / beta) independent
// of L_n, which is proportional to exp(-n G(m + y / n^gamma)). Normalized on the
// grid. Throws NumericError when the density at the grid boundary exceeds 1e-9 of
// its peak.
HSGrid hs_density(const ModelParams& params, const Eigen::VectorXd& m, double gamma, const GridSpec& grid);

// Same variable computed as a Gaussian mixture over the exact law's atoms;
// normalized analytically, not on the grid.
HSGrid convolved_exact_law(const ExactLaw& law, const Eigen::VectorXd& center, double gamma, const GridSpec& grid);

struct DensityGap {
    double tv = 0.0;
    double sup = 0.0;
};
DensityGap compare_densities(const HSGrid& a, const HSGrid& b);

// Grid covering every atom's kernel to +-half_width kernel standard deviations.
GridSpec law_envelope_grid(const ExactLaw& law, const Eigen::VectorXd& center, double gamma, int points,
                           double half_width = 7.5);

// Grid over +-half_width marginal standard deviations of N(0, [D^2 G]^{-1}).
GridSpec gaussian_envelope_grid(const PhasePoint& p, const Minimizer& m, int points, double half_width = 7.0);

// Marginal along one axis (integrating the others out).
std::vector<double> axis_marginal(const HSGrid& grid, std::size_t axis);

// Least-squares fit log p(y) = c0 - c4 y^4 over points with p >= floor * max p.
struct QuarticShapeFit {
    double c0 = 0.0;
    double c4 = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};
QuarticShapeFit quartic_shape_fit(const GridAxis& axis, const std::vector<double>& density, double floor = 1e-4);

// CSV: y_1..y_q,density
void write_csv(std::ostream& out, const HSGrid& grid);

}  // namespace cwp
