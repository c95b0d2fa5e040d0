#include "cwp/critical.hpp"

#include "cwp/error.hpp"
#include "cwp/free_energy.hpp"
#include "cwp/numeric.hpp"
#include "cwp/stein.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>

namespace cwp {

namespace {

Eigen::VectorXd critical_direction(int q) {
    Eigen::VectorXd u = Eigen::VectorXd::Ones(q);
    u[0] = 1.0 - q;
    return u;
}

// Batch-means standard error of the mean of xs.
double batch_se(std::span<const double> xs, std::size_t batches = 20) {
    const std::size_t m = xs.size();
    if (m < 2 * batches) return 0.0;
    std::vector<double> means(batches, 0.0);
    std::vector<double> sizes(batches, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        means[k * batches / m] += xs[k];
        sizes[k * batches / m] += 1.0;
    }
    double grand = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        means[b] /= sizes[b];
        grand += means[b];
    }
    grand /= static_cast<double>(batches);
    double ss = 0.0;
    for (double v : means) ss += (v - grand) * (v - grand);
    return std::sqrt(ss / (batches - 1.0) / batches);
}

}  // namespace

double critical_t(int n1, int q, int n) {
    return (n1 - 0.5 * n) / ((1.0 - q) * std::pow(static_cast<double>(n), 0.75));
}

CriticalDecomposition decompose(const CountVector& nu) {
    const int q = nu.q();
    const int n = nu.n();
    if (q < 3) throw ConfigError("q must be at least 3");
    if (n < 1) throw ConfigError("n must be at least 1");
    CriticalDecomposition d;
    d.center = point_from_z(q, 0.0);
    d.direction = critical_direction(q);
    d.t = critical_t(nu[0], q, n);
    const double root_n = std::sqrt(static_cast<double>(n));
    const double w0 = root_n * (static_cast<double>(nu[0]) / n - d.center[0]);
    d.v = Eigen::VectorXd::Zero(q);
    for (int j = 1; j < q; ++j) d.v[j] = root_n * (static_cast<double>(nu[j]) / n - d.center[j]) + w0 / (q - 1.0);
    return d;
}

Eigen::VectorXd reconstruct(const CriticalDecomposition& d, int n) {
    const double nd = n;
    return nd * d.center + std::pow(nd, 0.75) * d.t * d.direction + std::sqrt(nd) * d.v;
}

QuarticLaw::QuarticLaw(double a) : a_(a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("quartic coefficient must be positive");
    // exp(-a L^4) = e^{-30} keeps the tail mass below 1e-12
    half_width_ = std::pow(30.0 / a_, 0.25);
    const double a_copy = a_;
    auto raw = [a_copy](double t) { return std::exp(-a_copy * t * t * t * t); };
    norm_ = 2.0 * integrate(raw, 0.0, std::numeric_limits<double>::infinity(), 1e-14);

    constexpr int kHalfTable = 5000;  // 10^4 intervals over [-L, L]
    nodes_.resize(kHalfTable + 1);
    table_.resize(kHalfTable + 1);
    table_[0] = 0.0;
    for (int k = 0; k <= kHalfTable; ++k) nodes_[static_cast<std::size_t>(k)] = half_width_ * k / kHalfTable;
    using boost::math::quadrature::gauss;
    for (std::size_t k = 1; k < nodes_.size(); ++k)
        table_[k] = table_[k - 1] + gauss<double, 15>::integrate(raw, nodes_[k - 1], nodes_[k]) / norm_;
}

QuarticLaw QuarticLaw::with_coefficient(double a) { return QuarticLaw(a); }

QuarticLaw QuarticLaw::from_fourth_moment(double fourth_moment) {
    if (!(fourth_moment > 0.0)) throw ConfigError("fourth moment must be positive");
    QuarticLaw law(1.0 / (4.0 * fourth_moment));
    law.fourth_moment_input_ = fourth_moment;
    return law;
}

QuarticLaw QuarticLaw::limit(int q) {
    if (q < 3) throw ConfigError("q must be at least 3");
    return QuarticLaw(4.0 * std::pow(q - 1.0, 4) / 3.0);
}

double QuarticLaw::normalization_closed_form() const { return 2.0 * std::tgamma(1.25) * std::pow(a_, -0.25); }

double QuarticLaw::density(double t) const { return std::exp(-a_ * t * t * t * t) / norm_; }

double QuarticLaw::cdf(double t) const {
    const double r = std::abs(t);
    using boost::math::quadrature::gauss;
    auto raw = [this](double s) { return density(s); };
    double half;
    if (r >= half_width_) {
        half = table_.back() + gauss<double, 15>::integrate(raw, half_width_, std::min(r, 2.0 * half_width_));
    } else {
        const auto k = static_cast<std::size_t>(std::upper_bound(nodes_.begin(), nodes_.end(), r) - nodes_.begin()) - 1;
        half = table_[k] + gauss<double, 15>::integrate(raw, nodes_[k], r);
    }
    half = std::min(half, 0.5);
    return t >= 0.0 ? 0.5 + half : 0.5 - half;
}

double QuarticLaw::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile level must lie in (0, 1)");
    if (p < 0.5) return -quantile(1.0 - p);
    const double target = p - 0.5;
    if (target >= table_.back()) return half_width_;
    const auto k = static_cast<std::size_t>(std::upper_bound(table_.begin(), table_.end(), target) - table_.begin()) - 1;
    double lo = nodes_[k], hi = nodes_[k + 1];
    double t = lo + (hi - lo) * (target - table_[k]) / (table_[k + 1] - table_[k]);
    for (int it = 0; it < 50; ++it) {
        const double f = cdf(t) - p;
        if (f > 0.0) hi = t; else lo = t;
        double next = t - f / density(t);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t))) return next;
        t = next;
    }
    return t;
}

double kolmogorov_t_exact(std::span<const double> n1_pmf, int q, const QuarticLaw& target) {
    const int n = static_cast<int>(n1_pmf.size()) - 1;
    StepCdf step;
    double running = 0.0;
    // T decreases in N_1, so walk N_1 downward for ascending atoms.
    for (int k = n; k >= 0; --k) {
        const double mass = n1_pmf[static_cast<std::size_t>(k)];
        if (mass <= 0.0) continue;
        running += mass;
        step.x.push_back(critical_t(k, q, n));
        step.mass.push_back(mass);
        step.cdf.push_back(running);
    }
    return kolmogorov_step(step, [&target](double t) { return target.cdf(t); });
}

double kolmogorov_t_samples(std::vector<double> t_values, const QuarticLaw& target) {
    return kolmogorov_samples(std::move(t_values), [&target](double t) { return target.cdf(t); });
}

double exact_t_fourth_moment(std::span<const double> n1_pmf, int q) {
    const int n = static_cast<int>(n1_pmf.size()) - 1;
    double e4 = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double t = critical_t(k, q, n);
        e4 += n1_pmf[static_cast<std::size_t>(k)] * t * t * t * t;
    }
    return e4;
}

FourthMomentRow fourth_moment_exact(std::span<const double> n1_pmf, int q) {
    FourthMomentRow row;
    row.n = static_cast<int>(n1_pmf.size()) - 1;
    row.e_t4 = exact_t_fourth_moment(n1_pmf, q);
    row.normalized = 16.0 * std::pow(q - 1.0, 4) * row.e_t4 / 3.0;
    return row;
}

FourthMomentRow fourth_moment_samples(std::span<const double> t_values, int q, int n) {
    if (t_values.empty()) throw NumericError("no samples");
    std::vector<double> t4(t_values.size());
    std::transform(t_values.begin(), t_values.end(), t4.begin(), [](double t) { return t * t * t * t; });
    FourthMomentRow row;
    row.n = n;
    for (double v : t4) row.e_t4 += v;
    row.e_t4 /= static_cast<double>(t4.size());
    const double scale = 16.0 * std::pow(q - 1.0, 4) / 3.0;
    row.normalized = scale * row.e_t4;
    row.se = scale * batch_se(t4);
    return row;
}

VCheck v_gaussian_check(const CountSamples& samples) {
    const int q = samples.q;
    const std::size_t m = samples.size();
    if (m < 2) throw NumericError("need at least two samples");
    const int r = q - 1;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(m), r);
    VCheck out;
    out.samples = m;
    for (std::size_t k = 0; k < m; ++k) {
        const auto c = samples.at(k);
        const auto d = decompose(CountVector(std::vector<int>(c.begin(), c.end())));
        v.row(static_cast<Eigen::Index>(k)) = d.v.tail(r).transpose();
        out.max_constraint_violation = std::max(out.max_constraint_violation, std::abs(d.v.tail(r).sum()));
    }
    const Eigen::RowVectorXd mean = v.colwise().mean();
    const Eigen::MatrixXd centered = v.rowwise() - mean;
    out.cov_empirical = centered.transpose() * centered / (static_cast<double>(m) - 1.0);
    out.cov_target = extremity_taylor(q).v_covariance;
    out.var_v2 = out.cov_empirical(0, 0);
    std::vector<double> sq(m);
    std::vector<double> v2(m);
    for (std::size_t k = 0; k < m; ++k) {
        v2[k] = v(static_cast<Eigen::Index>(k), 0);
        sq[k] = centered(static_cast<Eigen::Index>(k), 0) * centered(static_cast<Eigen::Index>(k), 0);
    }
    out.var_v2_se = batch_se(sq);
    out.corr_v2_v3 = out.cov_empirical(0, 1) / std::sqrt(out.cov_empirical(0, 0) * out.cov_empirical(1, 1));
    const double var_emp = out.var_v2;
    const double var_target = out.cov_target(0, 0);
    out.dk_v2_empirical = kolmogorov_samples(v2, [var_emp](double t) { return normal_cdf(t, var_emp); });
    out.dk_v2_target = kolmogorov_samples(v2, [var_target](double t) { return normal_cdf(t, var_target); });
    return out;
}

}  // namespace cwp
