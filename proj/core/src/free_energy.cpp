#include "cwp/free_energy.hpp"

#include "cwp/error.hpp"
#include "cwp/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace cwp {

namespace {

Eigen::VectorXd field_logits(const Eigen::VectorXd& u, const PhasePoint& p) {
    Eigen::VectorXd logits = p.beta * u;
    logits[0] += p.h;
    return logits;
}

double root_function(double s, const PhasePoint& p) {
    return std::log1p((p.q - 1) * s) - std::log1p(-s) - p.beta * s - p.h;
}

double bisect(double lo, double hi, double f_lo, const PhasePoint& p) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = root_function(mid, p);
        if (f_mid == 0.0) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Minimizer make_minimizer(int q, double s, int slot) {
    Minimizer m;
    m.s = s;
    m.large_slot = slot;
    m.x = point_from_s(q, s, slot);
    return m;
}

}  // namespace

double free_energy(const Eigen::VectorXd& u, const PhasePoint& p) {
    const Eigen::VectorXd logits = field_logits(u, p);
    return 0.5 * p.beta * u.squaredNorm() - log_sum_exp(std::span<const double>(logits.data(), logits.size()));
}

Eigen::VectorXd field_softmax(const Eigen::VectorXd& u, const PhasePoint& p) { return softmax(field_logits(u, p)); }

Eigen::VectorXd free_energy_gradient(const Eigen::VectorXd& u, const PhasePoint& p) {
    return p.beta * (u - field_softmax(u, p));
}

Eigen::MatrixXd free_energy_hessian(const Eigen::VectorXd& u, const PhasePoint& p) {
    const Eigen::VectorXd pi = field_softmax(u, p);
    const auto q = u.size();
    Eigen::MatrixXd cov = -pi * pi.transpose();
    cov.diagonal() += pi;
    return p.beta * Eigen::MatrixXd::Identity(q, q) - p.beta * p.beta * cov;
}

double rate_function(const Eigen::VectorXd& x, const PhasePoint& p) {
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) entropy += x[i] * std::log(p.q * x[i]);
    return entropy - 0.5 * p.beta * x.squaredNorm() - p.h * x[0];
}

CriticalConstants closed_form_constants(int q) {
    PhasePoint{q, 0.0, 0.0}.validate();
    const double qd = q;
    return {2.0 * (qd - 1.0) / (qd - 2.0) * std::log(qd - 1.0), 4.0 * (qd - 1.0) / qd,
            std::log(qd - 1.0) - 2.0 * (qd - 2.0) / qd};
}

double critical_line_field(int q, double beta) {
    const double qd = q;
    return std::log(qd - 1.0) - beta * (qd - 2.0) / (2.0 * (qd - 1.0));
}

PhasePoint critical_line_point(int q, double z) {
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("z must lie in (0, 1)");
    const double qd = q;
    const double beta = 2.0 * (qd - 1.0) / (z * qd) * (std::log1p(z) - std::log1p(-z));
    return {q, beta, critical_line_field(q, beta)};
}

Eigen::VectorXd point_from_s(int q, double s, int large_slot) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(q, (1.0 - s) / q);
    x[large_slot] = (1.0 + (q - 1) * s) / q;
    return x;
}

Eigen::VectorXd point_from_z(int q, double z) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(q, (1.0 - z) / (2.0 * (q - 1)));
    x[0] = (1.0 + z) / 2.0;
    return x;
}

std::vector<double> mean_field_roots(const PhasePoint& p) {
    p.validate();
    constexpr int kScan = 10'000;
    std::vector<double> roots;
    std::vector<double> grid;
    grid.reserve(kScan + 1);
    for (int k = 0; k < kScan; ++k) grid.push_back(static_cast<double>(k) / kScan);
    grid.push_back(1.0 - 1e-15);

    std::size_t start = 0;
    if (p.h == 0.0) {
        roots.push_back(0.0);
        start = 1;
    }
    double s_prev = grid[start];
    double f_prev = root_function(s_prev, p);
    if (f_prev == 0.0 && start > 0) roots.push_back(s_prev);
    for (std::size_t k = start + 1; k < grid.size(); ++k) {
        const double s = grid[k];
        const double f = root_function(s, p);
        if (f == 0.0) {
            roots.push_back(s);
        } else if (f_prev != 0.0 && (f < 0.0) != (f_prev < 0.0)) {
            roots.push_back(bisect(s_prev, s, f_prev, p));
        }
        s_prev = s;
        f_prev = f;
    }
    return roots;
}

std::string_view to_string(PhaseTag tag) {
    switch (tag) {
        case PhaseTag::UniqueMinimizer: return "UniqueMinimizer";
        case PhaseTag::CriticalLinePair: return "CriticalLinePair";
        case PhaseTag::LowTempQFold: return "LowTempQFold";
        case PhaseTag::CriticalPointQPlus1: return "CriticalPointQPlus1";
        case PhaseTag::Extremity: return "Extremity";
    }
    return "unknown";
}

bool is_extremity(const PhasePoint& p) {
    const auto k = closed_form_constants(p.q);
    return std::abs(p.beta - k.beta_0) <= kExtremityTolerance && std::abs(p.h - k.h_0) <= kExtremityTolerance;
}

PhaseClassification find_minimizers(const PhasePoint& p) {
    p.validate();
    const int q = p.q;
    if (is_extremity(p)) {
        // The root there is triple, so bisection is only accurate to ~1e-5; use the closed form.
        Minimizer m = make_minimizer(q, (q - 2.0) / (2.0 * (q - 1.0)), 0);
        m.z = 0.0;
        return {PhaseTag::Extremity, {m}};
    }

    const auto roots = mean_field_roots(p);
    std::vector<std::pair<double, double>> candidates;  // (G, s)
    for (double s : roots) candidates.emplace_back(free_energy(point_from_s(q, s), p), s);
    const double g_min = std::min_element(candidates.begin(), candidates.end())->first;
    std::vector<double> kept;
    for (const auto& [g, s] : candidates)
        if (g - g_min <= kTieTolerance * (1.0 + std::abs(g_min))) kept.push_back(s);

    PhaseClassification out;
    if (p.h > 0.0) {
        for (double s : kept) {
            Minimizer m = make_minimizer(q, s, 0);
            if (kept.size() == 2) m.z = 2.0 * m.x[0] - 1.0;
            out.minimizers.push_back(std::move(m));
        }
        out.tag = kept.size() == 2 ? PhaseTag::CriticalLinePair : PhaseTag::UniqueMinimizer;
        if (kept.size() > 2) throw NumericError("more than two global minimizers at h > 0");
        return out;
    }

    bool has_uniform = false;
    std::vector<double> ordered;
    for (double s : kept) {
        if (s == 0.0)
            has_uniform = true;
        else
            ordered.push_back(s);
    }
    if (ordered.size() > 1) throw NumericError("more than one non-uniform minimizer shape at h = 0");
    if (has_uniform) out.minimizers.push_back(make_minimizer(q, 0.0, 0));
    for (double s : ordered)
        for (int slot = 0; slot < q; ++slot) {
            Minimizer m = make_minimizer(q, s, slot);
            m.z = 2.0 * m.x[slot] - 1.0;
            out.minimizers.push_back(std::move(m));
        }
    if (ordered.empty())
        out.tag = PhaseTag::UniqueMinimizer;
    else
        out.tag = has_uniform ? PhaseTag::CriticalPointQPlus1 : PhaseTag::LowTempQFold;
    return out;
}

Eigen::MatrixXd pattern_matrix(int q, double a, double b, double c, double d) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(q, q, c);
    m.diagonal().setConstant(d);
    m.row(0).setConstant(b);
    m.col(0).setConstant(b);
    m(0, 0) = a;
    return m;
}

double pattern_determinant(int q, double a, double b, double c, double d) {
    return std::pow(d - c, q - 2) * (a * (d + (q - 2) * c) - (q - 1) * b * b);
}

HessianSummary hessian_summary(const PhasePoint& p, const Minimizer& m) {
    p.validate();
    const int q = p.q;
    const double beta = p.beta;
    const double large = m.x[m.large_slot];
    const double small = m.x[m.large_slot == 0 ? 1 : 0];

    HessianSummary out;
    out.a = beta - beta * beta * (q - 1) * large * small;
    out.b = beta * beta * large * small;
    out.d = beta - beta * beta * (large * small + (q - 2) * small * small);
    out.c = beta * beta * small * small;
    out.matrix = free_energy_hessian(m.x, p);
    out.det = pattern_determinant(q, out.a, out.b, out.c, out.d);
    out.det_lu = out.matrix.partialPivLu().determinant();

    const double first = beta * small;
    const double second = beta * q * large * small;
    out.degenerate = std::abs(first - 1.0) <= kExtremityTolerance || std::abs(second - 1.0) <= kExtremityTolerance;
    out.positive_definite = !out.degenerate && first < 1.0 && second < 1.0;
    return out;
}

RegressionMatrix regression_matrix(const PhasePoint& p, const Minimizer& m, int n) {
    if (n < 1) throw ConfigError("n must be at least 1");
    const auto hs = hessian_summary(p, m);
    if (!hs.positive_definite) throw DegenerateHessian("Hessian of G is not positive definite at this minimizer");
    RegressionMatrix out;
    out.n = n;
    out.lambda = hs.matrix / (p.beta * n);
    out.lambda_inverse = out.lambda.inverse();
    out.column_sums = out.lambda_inverse.cwiseAbs().colwise().sum().transpose();
    return out;
}

Eigen::MatrixXd theoretical_sigma(const PhasePoint& p, const Minimizer& m) {
    const auto hs = hessian_summary(p, m);
    if (!hs.positive_definite) throw DegenerateHessian("Hessian of G is not positive definite at this minimizer");
    const auto q = m.x.size();
    Eigen::MatrixXd sigma = hs.matrix.inverse() - Eigen::MatrixXd::Identity(q, q) / p.beta;
    return 0.5 * (sigma + sigma.transpose());
}

ExtremityTaylor extremity_taylor(int q) {
    PhasePoint{q, 0.0, 0.0}.validate();
    const double Q = q;
    const double q1 = Q - 1.0;
    const double q2 = Q * Q, q3 = q2 * Q, q4 = q3 * Q;
    const auto k = closed_form_constants(q);

    ExtremityTaylor t;
    t.q = q;
    t.point = {q, k.beta_0, k.h_0};
    t.center = point_from_z(q, 0.0);

    t.d11 = 4.0 * q1 / q2;
    t.d1k = 4.0 * q1 / q2;
    t.dkk = 4.0 * (Q * Q - 3.0 * Q + 3.0) / q2;
    t.djk = 4.0 / q2;

    t.r111 = 0.0;
    t.r11k = 0.0;
    t.r1jj = 16.0 * q1 * (Q - 2.0) / q3;
    t.r1jk = -16.0 * q1 / q3;

    t.r1111 = 32.0 * std::pow(q1, 4) / q4;
    t.r111k = -32.0 * std::pow(q1, 3) / q4;
    t.r11kk = 32.0 * q1 * q1 / q4;
    t.r11jk = 32.0 * q1 * q1 / q4;
    t.r1kkk = 32.0 * q1 * (2.0 * Q * Q - 10.0 * Q + 11.0) / q4;
    t.r1jjk = -32.0 * q1 * (2.0 * Q - 5.0) / q4;
    t.r1jkl = 96.0 * q1 / q4;

    t.cubic_coefficient = -16.0 * std::pow(q1, 4) / (3.0 * Q);
    t.quartic_coefficient = 4.0 * std::pow(q1, 4) / 3.0;

    const int r = q - 1;
    t.reduced_hessian = (4.0 / q2) * (Eigen::MatrixXd::Ones(r, r) + q1 * (Q - 2.0) * Eigen::MatrixXd::Identity(r, r));
    t.reduced_hessian_det = std::pow(4.0 / q2, r) * std::pow(q1 * (Q - 2.0), r - 1) * q1 * q1;
    t.v_covariance = Q / (2.0 * q1 * q1 * (Q - 2.0)) *
                     (q1 * Eigen::MatrixXd::Identity(r, r) - Eigen::MatrixXd::Ones(r, r));
    return t;
}

}  // namespace cwp
