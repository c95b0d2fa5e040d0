#include "cwp/stein.hpp"

#include "cwp/error.hpp"
#include "cwp/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cwp {

PairMoments pair_moments_exact(const ModelParams& params, std::span<const int> counts,
                               const std::optional<ConditionedRegion>& region) {
    const int q = params.q;
    const int n = params.n;
    const double nd = n;
    const double unit = 1.0 / std::sqrt(nd);  // |Delta_i| for a swap
    PairMoments out;
    out.q = q;
    out.drift = Eigen::VectorXd::Zero(q);
    out.second = Eigen::MatrixXd::Zero(q, q);
    out.third_abs.assign(static_cast<std::size_t>(q * q * q), 0.0);

    std::vector<int> moved(counts.begin(), counts.end());
    std::vector<double> p(static_cast<std::size_t>(q));
    for (int from = 0; from < q; ++from) {
        const int group = counts[static_cast<std::size_t>(from)];
        if (group == 0) continue;
        double total = 0.0;
        for (int i = 0; i < q; ++i) {
            const int others = counts[static_cast<std::size_t>(i)] - (i == from ? 1 : 0);
            p[static_cast<std::size_t>(i)] = std::exp(params.beta * (others - nd) / nd + (i == 0 ? params.h : 0.0));
            total += p[static_cast<std::size_t>(i)];
        }
        const double site_weight = group / nd;  // P(I has color `from`)
        for (int to = 0; to < q; ++to) {
            if (to == from) continue;
            if (region) {
                --moved[static_cast<std::size_t>(from)];
                ++moved[static_cast<std::size_t>(to)];
                const bool inside = region->contains(moved, n);
                ++moved[static_cast<std::size_t>(from)];
                --moved[static_cast<std::size_t>(to)];
                if (!inside) continue;
            }
            const double w = site_weight * p[static_cast<std::size_t>(to)] / total;
            out.drift[to] += w * unit;
            out.drift[from] -= w * unit;
            const double sq = w * unit * unit;
            out.second(to, to) += sq;
            out.second(from, from) += sq;
            out.second(to, from) -= sq;
            out.second(from, to) -= sq;
            // |Delta_i Delta_j Delta_k| is unit^3 when all indices lie in {from, to}.
            const double cube = w * unit * unit * unit;
            const int idx[2] = {from, to};
            for (int a : idx)
                for (int b : idx)
                    for (int c : idx) out.third_abs[static_cast<std::size_t>((a * q + b) * q + c)] += cube;
        }
    }
    return out;
}

Eigen::VectorXd regression_residual(const ModelParams& params, std::span<const int> counts,
                                    const RegressionMatrix& lambda, const Eigen::VectorXd& center,
                                    const std::optional<ConditionedRegion>& region) {
    const double n = params.n;
    Eigen::VectorXd w(params.q);
    for (int i = 0; i < params.q; ++i) w[i] = std::sqrt(n) * (counts[static_cast<std::size_t>(i)] / n - center[i]);
    return pair_moments_exact(params, counts, region).drift + lambda.lambda * w;
}

std::vector<SteinSample> stein_samples(const ModelParams& params, const CountSamples& samples,
                                       const RegressionMatrix& lambda, const Eigen::VectorXd& center,
                                       const std::optional<ConditionedRegion>& region) {
    std::vector<SteinSample> out;
    out.reserve(samples.size());
    const double n = params.n;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto c = samples.at(k);
        SteinSample s;
        s.moments = pair_moments_exact(params, c, region);
        s.w.resize(params.q);
        for (int i = 0; i < params.q; ++i) s.w[i] = std::sqrt(n) * (c[static_cast<std::size_t>(i)] / n - center[i]);
        s.residual = s.moments.drift + lambda.lambda * s.w;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

// Per-sample feature layout: second (q^2), third_abs (q^3), residual (q).
struct FeatureSums {
    std::vector<double> s1, s2;
    double count = 0.0;
};

struct Terms {
    double A, B, C, A2;
};

Terms evaluate_terms(const FeatureSums& f, int q, const Eigen::VectorXd& lam) {
    const auto q2 = static_cast<std::size_t>(q * q);
    const auto q3 = static_cast<std::size_t>(q * q * q);
    const double m = f.count;
    auto mean = [&](std::size_t k) { return f.s1[k] / m; };
    auto sd = [&](std::size_t k) {
        const double mu = mean(k);
        return std::sqrt(std::max(0.0, (f.s2[k] - m * mu * mu) / (m - 1.0)));
    };
    Terms t{0, 0, 0, 0};
    for (int i = 0; i < q; ++i) {
        const double li = lam[i];
        for (int j = 0; j < q; ++j) {
            t.A += li * sd(static_cast<std::size_t>(i * q + j));
            for (int k = 0; k < q; ++k) t.B += li * mean(q2 + static_cast<std::size_t>((i * q + j) * q + k));
        }
        const std::size_t r = q2 + q3 + static_cast<std::size_t>(i);
        t.C += li * sd(r);
        t.A2 += li * std::sqrt(f.s2[r] / m);
    }
    return t;
}

}  // namespace

BoundTerms bound_terms(std::span<const SteinSample> samples, const RegressionMatrix& lambda) {
    if (samples.size() < kMinBoundSamples)
        throw NumericError("bound terms need at least " + std::to_string(kMinBoundSamples) + " samples");
    const int q = samples.front().moments.q;
    const auto q2 = static_cast<std::size_t>(q * q);
    const auto q3 = static_cast<std::size_t>(q * q * q);
    const std::size_t features = q2 + q3 + static_cast<std::size_t>(q);
    const std::size_t groups = 50;
    const std::size_t m = samples.size();

    std::vector<FeatureSums> per_group(groups, FeatureSums{std::vector<double>(features, 0.0),
                                                           std::vector<double>(features, 0.0), 0.0});
    std::vector<double> f(features);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& s = samples[k];
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) f[static_cast<std::size_t>(i * q + j)] = s.moments.second(i, j);
        std::copy(s.moments.third_abs.begin(), s.moments.third_abs.end(), f.begin() + static_cast<std::ptrdiff_t>(q2));
        for (int i = 0; i < q; ++i) f[q2 + q3 + static_cast<std::size_t>(i)] = s.residual[i];
        auto& g = per_group[k * groups / m];
        for (std::size_t a = 0; a < features; ++a) {
            g.s1[a] += f[a];
            g.s2[a] += f[a] * f[a];
        }
        g.count += 1.0;
    }
    FeatureSums total{std::vector<double>(features, 0.0), std::vector<double>(features, 0.0), 0.0};
    for (const auto& g : per_group) {
        for (std::size_t a = 0; a < features; ++a) {
            total.s1[a] += g.s1[a];
            total.s2[a] += g.s2[a];
        }
        total.count += g.count;
    }

    const Eigen::VectorXd& lam = lambda.column_sums;
    const Terms full = evaluate_terms(total, q, lam);
    std::vector<Terms> leave_out;
    for (const auto& g : per_group) {
        FeatureSums rest = total;
        for (std::size_t a = 0; a < features; ++a) {
            rest.s1[a] -= g.s1[a];
            rest.s2[a] -= g.s2[a];
        }
        rest.count -= g.count;
        leave_out.push_back(evaluate_terms(rest, q, lam));
    }
    auto jackknife = [&](auto member) {
        double mean = 0.0;
        for (const auto& t : leave_out) mean += t.*member;
        mean /= static_cast<double>(groups);
        double ss = 0.0;
        for (const auto& t : leave_out) ss += (t.*member - mean) * (t.*member - mean);
        return std::sqrt(ss * (groups - 1.0) / groups);
    };

    BoundTerms out;
    out.n = lambda.n;
    out.sample_size = m;
    out.lambda_cols = lam;
    out.A = {full.A, jackknife(&Terms::A)};
    out.B = {full.B, jackknife(&Terms::B)};
    out.C = {full.C, jackknife(&Terms::C)};
    out.A1 = out.A;
    out.A2 = {full.A2, jackknife(&Terms::A2)};
    out.A3 = {lam.sum(), 0.0};
    out.B_ceiling = lam.sum() * q * q * std::pow(2.0 / lambda.n, 1.5);
    return out;
}

double kolmogorov_step(const StepCdf& step, const std::function<double(double)>& target) {
    double sup = 0.0;
    double below = 0.0;
    for (std::size_t k = 0; k < step.x.size(); ++k) {
        const double g = target(step.x[k]);
        sup = std::max({sup, std::abs(step.cdf[k] - g), std::abs(below - g)});
        below = step.cdf[k];
    }
    return sup;
}

double kolmogorov_samples(std::vector<double> values, const std::function<double(double)>& target) {
    std::sort(values.begin(), values.end());
    const double m = static_cast<double>(values.size());
    double sup = 0.0;
    std::size_t k = 0;
    while (k < values.size()) {
        std::size_t end = k;
        while (end < values.size() && values[end] == values[k]) ++end;
        const double g = target(values[k]);
        sup = std::max({sup, std::abs(static_cast<double>(k) / m - g), std::abs(static_cast<double>(end) / m - g)});
        k = end;
    }
    return sup;
}

double kolmogorov_exact_marginal(const ExactLaw& law, const Eigen::VectorXd& center, double variance, int coord) {
    if (!(variance > 0.0)) throw ConfigError("comparison variance must be positive");
    const auto step = exact_marginal_cdf(law, coord, center[coord], std::sqrt(static_cast<double>(law.n())));
    return kolmogorov_step(step, [variance](double t) { return normal_cdf(t, variance); });
}

QuadrantGrid QuadrantGrid::covering(const Eigen::Matrix2d& cov, int points, double half_width) {
    if (points < 1) throw ConfigError("grid needs at least one point per axis");
    QuadrantGrid g;
    auto axis = [&](double sd) {
        std::vector<double> t(static_cast<std::size_t>(points));
        for (int k = 0; k < points; ++k)
            t[static_cast<std::size_t>(k)] =
                points == 1 ? 0.0 : -half_width * sd + 2.0 * half_width * sd * k / (points - 1);
        return t;
    };
    g.t1 = axis(std::sqrt(cov(0, 0)));
    g.t2 = axis(std::sqrt(cov(1, 1)));
    return g;
}

namespace {

double quadrant_sup(const std::vector<std::pair<Eigen::Vector2d, double>>& atoms, const Eigen::Matrix2d& cov,
                    const QuadrantGrid& grid) {
    std::vector<double> t1 = grid.t1, t2 = grid.t2;
    std::sort(t1.begin(), t1.end());
    std::sort(t2.begin(), t2.end());
    const std::size_t g1 = t1.size(), g2 = t2.size();
    std::vector<double> hist((g1 + 1) * (g2 + 1), 0.0);
    for (const auto& [w, p] : atoms) {
        const auto a = static_cast<std::size_t>(std::lower_bound(t1.begin(), t1.end(), w[0]) - t1.begin());
        const auto b = static_cast<std::size_t>(std::lower_bound(t2.begin(), t2.end(), w[1]) - t2.begin());
        hist[a * (g2 + 1) + b] += p;
    }
    // 2-D prefix sums: F(t1[i], t2[j]) = sum over a <= i, b <= j.
    for (std::size_t a = 0; a <= g1; ++a)
        for (std::size_t b = 0; b <= g2; ++b) {
            double v = hist[a * (g2 + 1) + b];
            if (a > 0) v += hist[(a - 1) * (g2 + 1) + b];
            if (b > 0) v += hist[a * (g2 + 1) + b - 1];
            if (a > 0 && b > 0) v -= hist[(a - 1) * (g2 + 1) + b - 1];
            hist[a * (g2 + 1) + b] = v;
        }
    double sup = 0.0;
    for (std::size_t i = 0; i < g1; ++i)
        for (std::size_t j = 0; j < g2; ++j)
            sup = std::max(sup, std::abs(hist[i * (g2 + 1) + j] - bivariate_normal_cdf(t1[i], t2[j], cov)));
    return sup;
}

}  // namespace

double kolmogorov_quadrant_grid(const ExactLaw& law, const Eigen::VectorXd& center, const Eigen::Matrix2d& cov,
                                const QuadrantGrid& grid) {
    const double n = law.n();
    std::vector<std::pair<Eigen::Vector2d, double>> atoms;
    atoms.reserve(law.size());
    for (std::size_t k = 0; k < law.size(); ++k) {
        const auto a = law.atom(k);
        atoms.emplace_back(Eigen::Vector2d(std::sqrt(n) * (a[0] / n - center[0]), std::sqrt(n) * (a[1] / n - center[1])),
                           law.prob(k));
    }
    return quadrant_sup(atoms, cov, grid);
}

double kolmogorov_quadrant_grid(std::span<const Eigen::Vector2d> samples, const Eigen::Matrix2d& cov,
                                const QuadrantGrid& grid) {
    std::vector<std::pair<Eigen::Vector2d, double>> atoms;
    atoms.reserve(samples.size());
    const double w = 1.0 / static_cast<double>(samples.size());
    for (const auto& s : samples) atoms.emplace_back(s, w);
    return quadrant_sup(atoms, cov, grid);
}

RateFit rate_fit(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw ConfigError("rate fit needs at least two points");
    RateFit fit;
    fit.points.assign(points.begin(), points.end());
    const double m = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& [n, v] : points) {
        if (!(n > 0.0) || !(v > 0.0)) throw ConfigError("rate fit needs positive n and values");
        sx += std::log(n);
        sy += std::log(v);
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [n, v] : points) {
        const double dx = std::log(n) - mx, dy = std::log(v) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw ConfigError("rate fit needs at least two distinct n");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return fit;
}

}  // namespace cwp
