#pragma once

#include "cwp/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace cwp {

// G(u) = (beta/2)|u|^2 - log sum_k exp(beta u_k + h [k == 0]).
double free_energy(const Eigen::VectorXd& u, const PhasePoint& p);
Eigen::VectorXd free_energy_gradient(const Eigen::VectorXd& u, const PhasePoint& p);
Eigen::MatrixXd free_energy_hessian(const Eigen::VectorXd& u, const PhasePoint& p);

// softmax(beta u + h e_0), the heat-bath law at mean field u
Eigen::VectorXd field_softmax(const Eigen::VectorXd& u, const PhasePoint& p);

// f(x) = sum x_i log(q x_i) - (beta/2)|x|^2 - h x_0 on the simplex
double rate_function(const Eigen::VectorXd& x, const PhasePoint& p);

struct CriticalConstants {
    double beta_c;  // first-order transition temperature at h = 0
    double beta_0;  // extremity of the critical line
    double h_0;
};
CriticalConstants closed_form_constants(int q);

// Field on the coexistence line at inverse temperature beta.
double critical_line_field(int q, double beta);

// Point (beta_z, h_z) of the coexistence line whose two minimizers are x_{+z}, x_{-z}.
PhasePoint critical_line_point(int q, double z);

// ((1 + (q-1)s)/q, (1-s)/q, ...) with the large entry at slot large_slot
Eigen::VectorXd point_from_s(int q, double s, int large_slot = 0);
// ((1+z)/2, (1-z)/(2(q-1)), ...)
Eigen::VectorXd point_from_z(int q, double z);

// Roots in [0,1) of log(1+(q-1)s) - log(1-s) - beta s - h.
std::vector<double> mean_field_roots(const PhasePoint& p);

struct Minimizer {
    Eigen::VectorXd x;
    double s = 0.0;
    std::optional<double> z;  // set when x is one of the x_z points of a coexistence/critical case
    int large_slot = 0;
};

enum class PhaseTag { UniqueMinimizer, CriticalLinePair, LowTempQFold, CriticalPointQPlus1, Extremity };
std::string_view to_string(PhaseTag tag);

struct PhaseClassification {
    PhaseTag tag;
    std::vector<Minimizer> minimizers;
};

inline constexpr double kExtremityTolerance = 1e-9;
inline constexpr double kTieTolerance = 1e-10;

bool is_extremity(const PhasePoint& p);
PhaseClassification find_minimizers(const PhasePoint& p);

struct HessianSummary {
    double a = 0, b = 0, c = 0, d = 0;  // (large,large), (large,small), (small,small'), (small,small)
    Eigen::MatrixXd matrix;
    double det = 0;     // product formula
    double det_lu = 0;  // LU determinant of matrix
    bool positive_definite = false;
    bool degenerate = false;
};

// q x q matrix with a at (0,0), b on the rest of row/column 0, d on the remaining
// diagonal and c elsewhere.
Eigen::MatrixXd pattern_matrix(int q, double a, double b, double c, double d);
double pattern_determinant(int q, double a, double b, double c, double d);

HessianSummary hessian_summary(const PhasePoint& p, const Minimizer& m);

// Lambda = D^2 G(x) / (beta n) and lambda_i = sum_m |(Lambda^{-1})_{m,i}|.
struct RegressionMatrix {
    int n = 0;
    Eigen::MatrixXd lambda;
    Eigen::MatrixXd lambda_inverse;
    Eigen::VectorXd column_sums;
};
RegressionMatrix regression_matrix(const PhasePoint& p, const Minimizer& m, int n);

// [D^2 G(x)]^{-1} - I / beta; throws DegenerateHessian unless positive definite.
Eigen::MatrixXd theoretical_sigma(const PhasePoint& p, const Minimizer& m);

// Closed-form derivatives of G at the extremity center x = (1/2, 1/(2(q-1)), ...),
// (beta, h) = (beta_0, h_0). Index 1 is the large color, j,k,l distinct small colors.
struct ExtremityTaylor {
    int q = 3;
    PhasePoint point;
    Eigen::VectorXd center;
    double d11 = 0, d1k = 0, dkk = 0, djk = 0;
    double r111 = 0, r11k = 0, r1jj = 0, r1jk = 0;
    double r1111 = 0, r111k = 0, r11kk = 0, r11jk = 0, r1kkk = 0, r1jjk = 0, r1jkl = 0;
    double cubic_coefficient = 0;    // of t^3 in d/dx_1 G along x + t u
    double quartic_coefficient = 0;  // of t^4 in G(x + t u) - G(x), u = (1-q, 1, ..., 1)
    Eigen::MatrixXd reduced_hessian;  // (q-1)x(q-1)
    double reduced_hessian_det = 0;
    Eigen::MatrixXd v_covariance;  // (q-1)x(q-1), covariance of (V_2..V_q)
};
ExtremityTaylor extremity_taylor(int q);

}  // namespace cwp
