#include "cwp/hs_oracle.hpp"

#include "cwp/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace cwp {

std::size_t GridSpec::size() const {
    std::size_t total = 1;
    for (const auto& a : axes) total *= static_cast<std::size_t>(a.points);
    return total;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (const auto& a : axes) v *= a.spacing();
    return v;
}

bool GridSpec::operator==(const GridSpec& other) const {
    if (axes.size() != other.axes.size()) return false;
    for (std::size_t d = 0; d < axes.size(); ++d)
        if (axes[d].lo != other.axes[d].lo || axes[d].hi != other.axes[d].hi || axes[d].points != other.axes[d].points)
            return false;
    return true;
}

GridSpec GridSpec::refined() const {
    GridSpec out = *this;
    for (auto& a : out.axes) a.points = 2 * (a.points - 1) + 1;
    return out;
}

double HSGrid::mass() const {
    double total = 0.0;
    for (double v : density) total += v;
    return total * grid.cell_volume();
}

namespace {

void check_grid(const GridSpec& grid, int q) {
    if (static_cast<int>(grid.axes.size()) != q) throw ConfigError("grid dimension must equal q");
    for (const auto& a : grid.axes)
        if (a.points < 2 || !(a.hi > a.lo)) throw ConfigError("each grid axis needs hi > lo and at least 2 points");
}

// Calls visit(flat_index, coordinates) for every grid point in storage order.
void for_each_point(const GridSpec& grid, const std::function<void(std::size_t, const Eigen::VectorXd&)>& visit) {
    const auto dims = grid.axes.size();
    std::vector<int> idx(dims, 0);
    Eigen::VectorXd y(static_cast<Eigen::Index>(dims));
    for (std::size_t d = 0; d < dims; ++d) y[static_cast<Eigen::Index>(d)] = grid.axes[d].at(0);
    const std::size_t total = grid.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        visit(flat, y);
        for (std::size_t d = dims; d-- > 0;) {
            if (++idx[d] < grid.axes[d].points) {
                y[static_cast<Eigen::Index>(d)] = grid.axes[d].at(idx[d]);
                break;
            }
            idx[d] = 0;
            y[static_cast<Eigen::Index>(d)] = grid.axes[d].at(0);
        }
    }
}

bool on_boundary(std::size_t flat, const GridSpec& grid) {
    for (std::size_t d = grid.axes.size(); d-- > 0;) {
        const auto pts = static_cast<std::size_t>(grid.axes[d].points);
        const std::size_t k = flat % pts;
        if (k == 0 || k + 1 == pts) return true;
        flat /= pts;
    }
    return false;
}

}  // namespace

HSGrid hs_density(const ModelParams& params, const Eigen::VectorXd& m, double gamma, const GridSpec& grid) {
    params.validate();
    check_grid(grid, params.q);
    const PhasePoint p = params.phase();
    const double n = params.n;
    const double shrink = std::pow(n, -gamma);
    HSGrid out;
    out.gamma = gamma;
    out.m = m;
    out.grid = grid;
    out.density.resize(grid.size());
    for_each_point(grid, [&](std::size_t flat, const Eigen::VectorXd& y) {
        out.density[flat] = -n * free_energy(m + shrink * y, p);
    });
    const double top = *std::max_element(out.density.begin(), out.density.end());
    double edge = 0.0;
    for (std::size_t k = 0; k < out.density.size(); ++k) {
        out.density[k] = std::exp(out.density[k] - top);
        if (on_boundary(k, grid)) edge = std::max(edge, out.density[k]);
    }
    if (edge > 1e-9) {
        std::ostringstream msg;
        msg << "grid does not cover the density (boundary/peak = " << edge << "); try bounds";
        for (const auto& a : grid.axes) {
            const double mid = 0.5 * (a.lo + a.hi), half = 0.75 * (a.hi - a.lo);
            msg << " [" << mid - half << ", " << mid + half << "]";
        }
        throw NumericError(msg.str());
    }
    const double total = out.mass();
    for (double& v : out.density) v /= total;
    return out;
}

HSGrid convolved_exact_law(const ExactLaw& law, const Eigen::VectorXd& center, double gamma, const GridSpec& grid) {
    const int q = law.q();
    check_grid(grid, q);
    if (!(law.params().beta > 0.0)) throw ConfigError("the Gaussian kernel needs beta > 0");
    const double n = law.n();
    const double width = std::pow(n, gamma - 0.5) / std::sqrt(law.params().beta);
    const double scale = std::pow(n, gamma);
    const double norm = 1.0 / (width * std::sqrt(2.0 * std::numbers::pi));

    HSGrid out;
    out.gamma = gamma;
    out.m = center;
    out.grid = grid;
    out.density.assign(grid.size(), 0.0);

    const auto dims = static_cast<std::size_t>(q);
    std::vector<std::vector<double>> kernel(dims);
    std::vector<std::size_t> stride(dims, 1);
    for (std::size_t d = dims - 1; d-- > 0;) stride[d] = stride[d + 1] * static_cast<std::size_t>(grid.axes[d + 1].points);

    // Separable kernel: accumulate prod_d K_d(y_d) with nested loops.
    std::function<void(std::size_t, std::size_t, double)> accumulate = [&](std::size_t d, std::size_t base, double w) {
        const auto& k = kernel[d];
        if (d + 1 == dims) {
            for (std::size_t i = 0; i < k.size(); ++i) out.density[base + i] += w * k[i];
            return;
        }
        for (std::size_t i = 0; i < k.size(); ++i)
            if (k[i] != 0.0) accumulate(d + 1, base + i * stride[d], w * k[i]);
    };

    for (std::size_t a = 0; a < law.size(); ++a) {
        const double p = law.prob(a);
        if (p == 0.0) continue;
        const auto atom = law.atom(a);
        for (std::size_t d = 0; d < dims; ++d) {
            const double mu = scale * (atom[d] / n - center[static_cast<Eigen::Index>(d)]);
            const auto& axis = grid.axes[d];
            kernel[d].resize(static_cast<std::size_t>(axis.points));
            for (int k = 0; k < axis.points; ++k) {
                const double z = (axis.at(k) - mu) / width;
                kernel[d][static_cast<std::size_t>(k)] = norm * std::exp(-0.5 * z * z);
            }
        }
        accumulate(0, 0, p);
    }
    return out;
}

DensityGap compare_densities(const HSGrid& a, const HSGrid& b) {
    if (!(a.grid == b.grid)) throw ConfigError("densities live on different grids");
    DensityGap gap;
    double l1 = 0.0;
    for (std::size_t k = 0; k < a.density.size(); ++k) {
        const double diff = std::abs(a.density[k] - b.density[k]);
        l1 += diff;
        gap.sup = std::max(gap.sup, diff);
    }
    gap.tv = 0.5 * l1 * a.grid.cell_volume();
    return gap;
}

GridSpec law_envelope_grid(const ExactLaw& law, const Eigen::VectorXd& center, double gamma, int points,
                           double half_width) {
    const int q = law.q();
    const double n = law.n();
    const double width = std::pow(n, gamma - 0.5) / std::sqrt(law.params().beta);
    const double scale = std::pow(n, gamma);
    GridSpec spec;
    for (int d = 0; d < q; ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t a = 0; a < law.size(); ++a) {
            if (law.log_prob(a) < -40.0) continue;  // below 4e-18
            const double mu = scale * (law.atom(a)[static_cast<std::size_t>(d)] / n - center[d]);
            lo = std::min(lo, mu);
            hi = std::max(hi, mu);
        }
        spec.axes.push_back({lo - half_width * width, hi + half_width * width, points});
    }
    return spec;
}

GridSpec gaussian_envelope_grid(const PhasePoint& p, const Minimizer& m, int points, double half_width) {
    const Eigen::MatrixXd cov = free_energy_hessian(m.x, p).inverse();
    GridSpec spec;
    for (Eigen::Index d = 0; d < cov.rows(); ++d) {
        const double sd = std::sqrt(cov(d, d));
        spec.axes.push_back({-half_width * sd, half_width * sd, points});
    }
    return spec;
}

std::vector<double> axis_marginal(const HSGrid& grid, std::size_t axis) {
    const auto& axes = grid.grid.axes;
    if (axis >= axes.size()) throw ConfigError("axis out of range");
    std::vector<double> marginal(static_cast<std::size_t>(axes[axis].points), 0.0);
    double other_volume = 1.0;
    for (std::size_t d = 0; d < axes.size(); ++d)
        if (d != axis) other_volume *= axes[d].spacing();
    std::size_t stride = 1;
    for (std::size_t d = axes.size(); d-- > axis + 1;) stride *= static_cast<std::size_t>(axes[d].points);
    const auto pts = static_cast<std::size_t>(axes[axis].points);
    for (std::size_t k = 0; k < grid.density.size(); ++k) marginal[(k / stride) % pts] += grid.density[k];
    for (double& v : marginal) v *= other_volume;
    return marginal;
}

QuarticShapeFit quartic_shape_fit(const GridAxis& axis, const std::vector<double>& density, double floor) {
    const double top = *std::max_element(density.begin(), density.end());
    std::vector<double> xs, ys;
    for (int k = 0; k < axis.points; ++k) {
        const double p = density[static_cast<std::size_t>(k)];
        if (p <= 0.0 || p < floor * top) continue;
        const double y = axis.at(k);
        xs.push_back(y * y * y * y);
        ys.push_back(std::log(p));
    }
    QuarticShapeFit fit;
    fit.points = xs.size();
    if (xs.size() < 3) throw NumericError("too few points above the floor for a shape fit");
    const double m = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= m;
    my /= m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
        syy += (ys[k] - my) * (ys[k] - my);
    }
    const double slope = sxy / sxx;
    fit.c4 = -slope;
    fit.c0 = my - slope * mx;
    fit.r_squared = sxy * sxy / (sxx * syy);
    return fit;
}

void write_csv(std::ostream& out, const HSGrid& grid) {
    const auto dims = grid.grid.axes.size();
    for (std::size_t d = 0; d < dims; ++d) out << "y_" << d + 1 << ',';
    out << "density\n";
    const auto old_precision = out.precision(17);
    for_each_point(grid.grid, [&](std::size_t flat, const Eigen::VectorXd& y) {
        for (Eigen::Index d = 0; d < y.size(); ++d) out << y[d] << ',';
        out << grid.density[flat] << '\n';
    });
    out.precision(old_precision);
}

}  // namespace cwp
