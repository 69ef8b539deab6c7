#pragma once
// Morawetz multiplier machinery: bulk coefficients of the generalized
// Morawetz current, the lower bounds for the Morawetz potential, the reduction
// of -(A phi')' + V phi = 0 to a hypergeometric equation, the Frobenius
// solutions of the Zerilli lower-bound problem and their C^1 gluing into a
// positive solution, and a numerical Hardy-inequality check.
//
// Everything past multiplier_quantities() works in units M = 1.

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rwz/background.hpp"
#include "rwz/errors.hpp"
#include "rwz/specfun.hpp"

namespace rwz::morawetz {

// ---------------------------------------------------------------------------
// Multiplier quantities
// ---------------------------------------------------------------------------

struct MultiplierQuantities {
    double w;         // r^5 / 6
    double frak_a;    // Delta / r^4
    double f;         // d(frak_a)/dr = -2(r - 3M)/r^4
    double A;         // M Delta^2 / r^4
    double U;         // w f^2 / 2
    double underU;    // (r - 3M)^2 / (3 r^3)
    double V_script;  // bulk potential of the Morawetz current
};

/// Bulk potential for Regge-Wheeler: -5M/(2r^2) + 15M^2/r^3 - 23M^3/r^4.
inline double morawetz_potential_rw(const BackgroundParams& bg, double r) {
    const double m = bg.mass();
    const double x = m / r;
    return (-2.5 * x + 15.0 * x * x - 23.0 * x * x * x) / r;
}

/// Zerilli bulk potential minus the Regge-Wheeler one. Closed form of
/// (1/2) w f d/dr(frak_a r^2 (V_g^Z - V_g^RW)):
///   -2M (r-3M) P(r) / (r^4 (lambda r + 3M)^3),
///   P = 3 l^2 r^4 + (9 l - 20 l^2) M r^3 + (30 l^2 - 75 l + 9) M^2 r^2
///       + (126 l - 81) M^3 r + 144 M^4.
inline double morawetz_potential_zerilli_excess(const BackgroundParams& bg, const ModeSpec& mode,
                                                double r) {
    const double m = bg.mass();
    const double l = mode.lambda_bar();
    const double r2 = r * r;
    const double p = 3.0 * l * l * r2 * r2 + (9.0 * l - 20.0 * l * l) * m * r2 * r +
                     (30.0 * l * l - 75.0 * l + 9.0) * m * m * r2 + (126.0 * l - 81.0) * m * m * m * r +
                     144.0 * m * m * m * m;
    const double big_lambda = l * r + 3.0 * m;
    return -2.0 * m * (r - 3.0 * m) * p / (r2 * r2 * big_lambda * big_lambda * big_lambda);
}

/// V_script = (1/4) d_r(Delta d_r(frak_a d_r(w f))) + (1/2) w f d_r(frak_a r^2 V_g).
inline double morawetz_potential(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    double v = morawetz_potential_rw(bg, r);
    if (mode.kind() == Kind::Zerilli) v += morawetz_potential_zerilli_excess(bg, mode, r);
    return v;
}

inline MultiplierQuantities multiplier_quantities(const BackgroundParams& bg, const ModeSpec& mode,
                                                  double r) {
    if (!(r >= bg.horizon_radius())) throw DomainError("multiplier_quantities: requires r >= 2M");
    const double m = bg.mass();
    const double r4 = r * r * r * r;
    const double delta = bg.delta(r);
    MultiplierQuantities q{};
    q.w = r4 * r / 6.0;
    q.frak_a = delta / r4;
    q.f = -2.0 * (r - 3.0 * m) / r4;
    q.A = m * delta * delta / r4;
    q.U = 0.5 * q.w * q.f * q.f;
    q.underU = (r - 3.0 * m) * (r - 3.0 * m) / (3.0 * r * r * r);
    q.V_script = morawetz_potential(bg, mode, r);
    return q;
}

// ---------------------------------------------------------------------------
// Lower bounds for V_script + 6 underU
// ---------------------------------------------------------------------------

struct LowerBounds {
    double le_3M;  // 5M/(2r^2) - (41/3) M^2/r^3 + 18 M^3/r^4
    double ge_3M;  // M/(2r^2) - 4 M^2/r^3 + 7 M^3/r^4
    double joint;  // le_3M on [2M, 3M], ge_3M beyond
};

namespace detail {
inline double quadratic_potential(double m, double r, double v2, double v1, double v0) {
    const double x = m / r;
    return (v2 * x + v1 * x * x + v0 * x * x * x) / r;
}
} // namespace detail

inline LowerBounds lower_bound_potentials(const BackgroundParams& bg, double r) {
    if (!(r >= bg.horizon_radius())) throw DomainError("lower_bound_potentials: requires r >= 2M");
    const double m = bg.mass();
    LowerBounds lb{};
    lb.le_3M = detail::quadratic_potential(m, r, 2.5, -41.0 / 3.0, 18.0);
    lb.ge_3M = detail::quadratic_potential(m, r, 0.5, -4.0, 7.0);
    lb.joint = r <= bg.photon_sphere_radius() ? lb.le_3M : lb.ge_3M;
    return lb;
}

/// Regge-Wheeler lower bound 3M/(2r^2) - 9M^2/r^3 + 13M^3/r^4.
inline double rw_lower_bound(const BackgroundParams& bg, double r) {
    return detail::quadratic_potential(bg.mass(), r, 1.5, -9.0, 13.0);
}

struct LowerBoundReport {
    Kind kind = Kind::Zerilli;
    int ell = 2;
    std::size_t points = 0;
    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    double r_at_min = 0.0;
    bool passed(double slack_tol = 1e-12) const { return violations == 0 && min_slack >= -slack_tol; }
};

/// Checks the Morawetz lower bound on the grid:
///   Zerilli: V_script + 6 underU >= V_joint
///   Regge-Wheeler: V_script + 6 underU (2M/r) >= 3M/(2r^2) - 9M^2/r^3 + 13M^3/r^4
/// Violations (slack < -slack_tol) are counted, never thrown.
inline LowerBoundReport verify_morawetz_lower_bound(const BackgroundParams& bg, const ModeSpec& mode,
                                                    std::span<const double> r_grid,
                                                    double slack_tol = 1e-12) {
    LowerBoundReport report;
    report.kind = mode.kind();
    report.ell = mode.ell();
    for (const double r : r_grid) {
        const auto q = multiplier_quantities(bg, mode, r);
        double slack = 0.0;
        if (mode.kind() == Kind::Zerilli) {
            slack = q.V_script + 6.0 * q.underU - lower_bound_potentials(bg, r).joint;
        } else {
            slack = q.V_script + 6.0 * q.underU * bg.horizon_radius() / r - rw_lower_bound(bg, r);
        }
        ++report.points;
        if (slack < -slack_tol) ++report.violations;
        if (slack < report.min_slack) {
            report.min_slack = slack;
            report.r_at_min = r;
        }
    }
    return report;
}

/// n log-spaced points in (lo, hi]; lo itself is excluded.
inline std::vector<double> log_grid_open_left(double lo, double hi, std::size_t n) {
    std::vector<double> grid(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = std::exp(llo + (lhi - llo) * double(k + 1) / double(n));
    }
    grid.back() = hi;
    return grid;
}

/// n log-spaced points in [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> grid(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = std::exp(llo + (lhi - llo) * double(k) / double(n - 1));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

// ---------------------------------------------------------------------------
// Hypergeometric reduction
// ---------------------------------------------------------------------------

/// V(r) = (M/r^4)(V2 r^2 + V1 M r + V0 M^2).
struct PotentialSpec {
    double V2;
    double V1;
    double V0;
};

inline constexpr PotentialSpec kReggeWheelerSpec{1.5, -9.0, 13.0};
inline constexpr PotentialSpec kZerilliInnerSpec{2.5, -41.0 / 3.0, 18.0};
inline constexpr PotentialSpec kZerilliOuterSpec{0.5, -4.0, 7.0};

struct HypergeomParams {
    double alpha;
    double beta;
    double a;
    double b;
    double c;
    PotentialSpec source;

    /// None of c, c-a-b, a-b is an integer (within 1e-9).
    bool generic() const {
        return !specfun::detail::near_integer(c) && !specfun::detail::near_integer(c - a - b) &&
               !specfun::detail::near_integer(a - b);
    }
};

/// Exponents and hypergeometric parameters for -(A phi')' + V phi = 0 with
/// A = M Delta^2/r^4. alpha takes the + root, beta the - root, and a <= b.
inline HypergeomParams derive_params(const PotentialSpec& spec) {
    const double rad_alpha = 4.0 * spec.V2 + 2.0 * spec.V1 + spec.V0 + 1.0;
    const double rad_beta = 9.0 + spec.V0;
    const double rad_ab = 1.0 + 4.0 * spec.V2;
    if (rad_alpha < 0.0 || rad_beta < 0.0 || rad_ab < 0.0) {
        throw DomainError("derive_params: complex characteristic exponents (negative radicand)");
    }
    const double s_alpha = std::sqrt(rad_alpha);
    const double s_beta = std::sqrt(rad_beta);
    const double s_ab = std::sqrt(rad_ab);
    HypergeomParams p{};
    p.alpha = 0.5 + 0.5 * s_alpha;
    p.beta = 0.5 - 0.5 * s_beta;
    p.a = 0.5 * (1.0 + s_alpha - s_beta - s_ab);
    p.b = 0.5 * (1.0 + s_alpha - s_beta + s_ab);
    p.c = 1.0 + s_alpha;
    p.source = spec;
    return p;
}

/// W(x) for -v'' + W v = 0 after v = A^{1/2} phi, x = r - 2M (M = 1):
/// (V2 x^2 + (4V2 + V1 - 4) x + (4V2 + 2V1 + V0)) / (x^2 (x + 2)^2).
inline double transformed_w(const PotentialSpec& spec, double x) {
    const double num = spec.V2 * x * x + (4.0 * spec.V2 + spec.V1 - 4.0) * x +
                       (4.0 * spec.V2 + 2.0 * spec.V1 + spec.V0);
    const double d = x * (x + 2.0);
    return num / (d * d);
}

enum class Region { Inner, Outer };

/// W1 (x <= M) or W2 (x > M) of the Zerilli lower-bound problem.
inline double transformed_w(const BackgroundParams& bg, double x, Region region) {
    if (!(x > 0.0)) throw DomainError("transformed_w: requires x > 0");
    const double m = bg.mass();
    const double d = x * (x + 2.0 * m);
    if (region == Region::Inner) {
        return (15.0 * x * x - 46.0 * m * x + 4.0 * m * m) / (6.0 * d * d);
    }
    return (x * x - 12.0 * m * x + 2.0 * m * m) / (2.0 * d * d);
}

/// W of the glued Zerilli problem in units M = 1.
inline double joint_w(double x) {
    static const BackgroundParams unit{1.0};
    return transformed_w(unit, x, x <= 1.0 ? Region::Inner : Region::Outer);
}

enum class Frobenius { First, Second };

namespace detail {

struct FrobeniusForm {
    double extra_power;  // additional x^{1-c} for the second solution
    specfun::Hyp2F1Args args;
};

inline FrobeniusForm frobenius_form(const HypergeomParams& p, Frobenius which, double x) {
    const double z = -0.5 * x;
    if (which == Frobenius::First) return {0.0, {p.a, p.b, p.c, z}};
    return {1.0 - p.c, {p.a - p.c + 1.0, p.b - p.c + 1.0, 2.0 - p.c, z}};
}

} // namespace detail

/// x^alpha (x+2)^beta F(a,b;c;-x/2)  or  x^alpha (x+2)^beta x^{1-c} F(a-c+1,b-c+1;2-c;-x/2).
inline double frobenius_eval(const HypergeomParams& p, Frobenius which, double x,
                             double tol = specfun::kDefaultTol) {
    if (!(x > 0.0)) throw DomainError("frobenius_eval: requires x > 0");
    const auto form = detail::frobenius_form(p, which, x);
    const double prefactor = std::pow(x, p.alpha + form.extra_power) * std::pow(x + 2.0, p.beta);
    return prefactor * specfun::eval_2f1(form.args, tol);
}

/// d/dx of frobenius_eval, using dF/dz = (ab/c) F(a+1,b+1;c+1;z).
inline double frobenius_derivative(const HypergeomParams& p, Frobenius which, double x,
                                   double tol = specfun::kDefaultTol) {
    if (!(x > 0.0)) throw DomainError("frobenius_derivative: requires x > 0");
    const auto form = detail::frobenius_form(p, which, x);
    const double f = specfun::eval_2f1(form.args, tol);
    const double df_dx = -0.5 * specfun::eval_2f1_dz(form.args, tol);
    const double power = p.alpha + form.extra_power;
    const double prefactor = std::pow(x, power) * std::pow(x + 2.0, p.beta);
    return prefactor * ((power / x + p.beta / (x + 2.0)) * f + df_dx);
}

// ---------------------------------------------------------------------------
// Matching constants and the ratio limit
// ---------------------------------------------------------------------------

struct MatchingConstants {
    double w11;  // u11'(1) / u11(1)
    double w21;  // u21'(1) / u21(1)
    double w22;  // u22'(1) / u22(1)
    double w11_fd;
    double w21_fd;
    double w22_fd;
    double max_disagreement;
};

namespace detail {

/// Romberg table of central differences at x0; error O(h^8) after 4 levels.
template <class F>
double richardson_derivative(F&& f, double x0, double h0 = 0.05, int levels = 4) {
    std::array<std::array<double, 8>, 8> table{};
    double h = h0;
    for (int i = 0; i < levels; ++i, h *= 0.5) {
        table[i][0] = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        double factor = 4.0;
        for (int j = 1; j <= i; ++j, factor *= 4.0) {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
        }
    }
    return table[levels - 1][levels - 1];
}

} // namespace detail

/// Logarithmic derivatives of u11, u21, u22 at x = 1 (i.e. derivatives after
/// normalising each to 1 at x = 1), computed analytically and by Richardson
/// extrapolated finite differences. Throws CheckFailure if the two routes
/// disagree by more than agreement_tol.
inline MatchingConstants matching_constants(double tol = specfun::kDefaultTol,
                                            double agreement_tol = 1e-9) {
    const auto inner = derive_params(kZerilliInnerSpec);
    const auto outer = derive_params(kZerilliOuterSpec);
    auto log_derivative = [&](const HypergeomParams& p, Frobenius which) {
        return frobenius_derivative(p, which, 1.0, tol) / frobenius_eval(p, which, 1.0, tol);
    };
    auto fd_log_derivative = [&](const HypergeomParams& p, Frobenius which) {
        const double norm = frobenius_eval(p, which, 1.0, tol);
        return detail::richardson_derivative(
            [&](double x) { return frobenius_eval(p, which, x, tol) / norm; }, 1.0);
    };
    MatchingConstants mc{};
    mc.w11 = log_derivative(inner, Frobenius::First);
    mc.w21 = log_derivative(outer, Frobenius::First);
    mc.w22 = log_derivative(outer, Frobenius::Second);
    mc.w11_fd = fd_log_derivative(inner, Frobenius::First);
    mc.w21_fd = fd_log_derivative(outer, Frobenius::First);
    mc.w22_fd = fd_log_derivative(outer, Frobenius::Second);
    mc.max_disagreement = std::max({std::abs(mc.w11 - mc.w11_fd), std::abs(mc.w21 - mc.w21_fd),
                                    std::abs(mc.w22 - mc.w22_fd)});
    if (!(mc.max_disagreement <= agreement_tol)) {
        throw CheckFailure("matching_constants: analytic and finite-difference derivatives disagree by " +
                           std::to_string(mc.max_disagreement));
    }
    return mc;
}

/// Normalised ratio (u22(x)/u22(1)) / (u21(x)/u21(1)) for the outer region.
inline double outer_ratio(double x, double tol = specfun::kDefaultTol) {
    const auto p = derive_params(kZerilliOuterSpec);
    const double n21 = frobenius_eval(p, Frobenius::First, 1.0, tol);
    const double n22 = frobenius_eval(p, Frobenius::Second, 1.0, tol);
    return (frobenius_eval(p, Frobenius::Second, x, tol) / n22) /
           (frobenius_eval(p, Frobenius::First, x, tol) / n21);
}

struct RatioLimit {
    double value;             // Lambda > 0 with u22/u21 -> -Lambda, by extrapolation
    double connection_value;  // same limit from the Gamma connection coefficients
    double exponent_gap;      // b2 - a2
    std::array<double, 4> sample_x;
    std::array<double, 4> sample_ratio;
};

/// Exact x -> infinity limit of the normalised ratio from the z -> infinity
/// connection coefficients: both u21 and u22 are dominated by the (x/2)^{-a}
/// branch, so the limit is a ratio of Gamma-function prefactors.
inline double ratio_limit_from_connection(double tol = specfun::kDefaultTol) {
    const auto p = derive_params(kZerilliOuterSpec);
    const double a = p.a, b = p.b, c = p.c;
    // F(a,b;c;z) ~ Gamma(c)Gamma(b-a)/(Gamma(b)Gamma(c-a)) (-z)^{-a}
    const double lead21 = std::tgamma(c) * std::tgamma(b - a) / (std::tgamma(b) * std::tgamma(c - a));
    // second solution: parameters (a-c+1, b-c+1; 2-c), extra x^{1-c} = 2^{1-c} (x/2)^{1-c}
    const double lead22 = std::pow(2.0, 1.0 - c) * std::tgamma(2.0 - c) * std::tgamma(b - a) /
                          (std::tgamma(b - c + 1.0) * std::tgamma(1.0 - a));
    const double n21 = frobenius_eval(p, Frobenius::First, 1.0, tol);
    const double n22 = frobenius_eval(p, Frobenius::Second, 1.0, tol);
    return -(lead22 / n22) / (lead21 / n21);
}

/// Lambda = -lim u22/u21 by generalized Richardson extrapolation of samples at
/// x = 1e2..1e5 with the correction model L + K1 x^-g + K2 x^-(g+1) + K3 x^-2g,
/// g = b2 - a2 (the branches f1 ~ x^-a and f2 ~ x^-b share their 1/x series, so
/// only powers of x^-g, times 1/x, appear). Cross-checked against the Gamma
/// connection coefficients; disagreement beyond cross_tol throws.
inline RatioLimit ratio_limit(double tol = specfun::kDefaultTol, double cross_tol = 1e-6) {
    const auto p = derive_params(kZerilliOuterSpec);
    RatioLimit out{};
    out.exponent_gap = p.b - p.a;
    out.sample_x = {1e2, 1e3, 1e4, 1e5};
    const double g = out.exponent_gap;
    const std::array<double, 4> exps{0.0, g, g + 1.0, 2.0 * g};
    std::array<std::array<double, 5>, 4> m{};
    for (int i = 0; i < 4; ++i) {
        const double x = out.sample_x[i];
        out.sample_ratio[i] = outer_ratio(x, tol);
        for (int j = 0; j < 4; ++j) m[i][j] = std::pow(x, -exps[j]);
        m[i][4] = out.sample_ratio[i];
    }
    // Gaussian elimination with partial pivoting on the 4x4 system.
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int i = col + 1; i < 4; ++i)
            if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
        std::swap(m[col], m[piv]);
        for (int i = 0; i < 4; ++i) {
            if (i == col) continue;
            const double factor = m[i][col] / m[col][col];
            for (int j = col; j < 5; ++j) m[i][j] -= factor * m[col][j];
        }
    }
    const double limit = m[0][4] / m[0][0];
    if (!std::isfinite(limit)) throw ConvergenceError("ratio_limit: extrapolation produced a non-finite value");
    out.value = -limit;
    out.connection_value = ratio_limit_from_connection(tol);
    if (!(std::abs(out.value - out.connection_value) <= cross_tol)) {
        throw CheckFailure("ratio_limit: extrapolated limit disagrees with connection-coefficient value");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Glued positive solution
// ---------------------------------------------------------------------------

struct GlueReport {
    std::size_t positivity_points = 0;
    double min_value = std::numeric_limits<double>::infinity();
    double x_at_min = 0.0;
    double dominance_margin = 0.0;       // (1-omega)/omega - Lambda
    double c1_mismatch = 0.0;            // |u'(1-) - u'(1+)|
    double c0_mismatch = 0.0;            // |u(1-) - u(1+)|
    double max_ode_residual_inner = 0.0; // relative |-u'' + W u| / (|u''| + |W u|)
    double max_ode_residual_outer = 0.0;
    double min_G = std::numeric_limits<double>::infinity();  // G = u22 + Lambda u21 on [1, 1e4]
    double G_at_one = 0.0;
};

/// Positive C^1 (hence C^2, since W is continuous) solution of -u'' + W u = 0
/// built from u11 on x <= 1 and omega u22 + (1 - omega) u21 on x > 1, each
/// Frobenius solution normalised to 1 at x = 1. Immutable after construction.
class GluedSolution {
public:
    GluedSolution(const HypergeomParams& inner, const HypergeomParams& outer, double tol = specfun::kDefaultTol)
        : inner_(inner), outer_(outer), tol_(tol) {
        n11_ = frobenius_eval(inner_, Frobenius::First, 1.0, tol_);
        n12_ = frobenius_eval(inner_, Frobenius::Second, 1.0, tol_);
        n21_ = frobenius_eval(outer_, Frobenius::First, 1.0, tol_);
        n22_ = frobenius_eval(outer_, Frobenius::Second, 1.0, tol_);
        w11_ = frobenius_derivative(inner_, Frobenius::First, 1.0, tol_) / n11_;
        w21_ = frobenius_derivative(outer_, Frobenius::First, 1.0, tol_) / n21_;
        w22_ = frobenius_derivative(outer_, Frobenius::Second, 1.0, tol_) / n22_;
        omega_ = (w11_ - w21_) / (w22_ - w21_);
    }

    double x_match() const noexcept { return 1.0; }
    double omega() const noexcept { return omega_; }
    double w11() const noexcept { return w11_; }
    double w21() const noexcept { return w21_; }
    double w22() const noexcept { return w22_; }
    const HypergeomParams& inner() const noexcept { return inner_; }
    const HypergeomParams& outer() const noexcept { return outer_; }

    double u11(double x) const { return frobenius_eval(inner_, Frobenius::First, x, tol_) / n11_; }
    double u12(double x) const { return frobenius_eval(inner_, Frobenius::Second, x, tol_) / n12_; }
    double u21(double x) const { return frobenius_eval(outer_, Frobenius::First, x, tol_) / n21_; }
    double u22(double x) const { return frobenius_eval(outer_, Frobenius::Second, x, tol_) / n22_; }

    double value(double x) const {
        if (x <= 1.0) return u11(x);
        return omega_ * u22(x) + (1.0 - omega_) * u21(x);
    }

    /// One-sided derivative; side < 0 selects the inner branch at x = 1.
    double derivative(double x, int side = 0) const {
        const bool use_inner = x < 1.0 || (x == 1.0 && side < 0);
        if (use_inner) return frobenius_derivative(inner_, Frobenius::First, x, tol_) / n11_;
        return omega_ * frobenius_derivative(outer_, Frobenius::Second, x, tol_) / n22_ +
               (1.0 - omega_) * frobenius_derivative(outer_, Frobenius::First, x, tol_) / n21_;
    }

    /// Glued solution as a function of r for mass M (x = (r - 2M)/M).
    double value_at_radius(const BackgroundParams& bg, double r) const {
        return value((r - bg.horizon_radius()) / bg.mass());
    }

    /// G = u22 + lambda u21, the decaying combination at infinity when lambda = Lambda.
    double G(double x, double lambda) const { return u22(x) + lambda * u21(x); }

    /// Relative ODE residual at x from a 5-point second difference with step
    /// delta; the stencil must not straddle x = 1.
    double ode_residual(double x, double delta) const {
        const double upp = (-value(x + 2 * delta) + 16 * value(x + delta) - 30 * value(x) +
                            16 * value(x - delta) - value(x - 2 * delta)) / (12.0 * delta * delta);
        const double wu = joint_w(x) * value(x);
        return std::abs(-upp + wu) / (std::abs(upp) + std::abs(wu));
    }

private:
    HypergeomParams inner_;
    HypergeomParams outer_;
    double tol_;
    double n11_ = 1, n12_ = 1, n21_ = 1, n22_ = 1;
    double w11_ = 0, w21_ = 0, w22_ = 0, omega_ = 0;
};

struct GlueOptions {
    double x_min = 1e-6;
    double x_max = 1e4;
    std::size_t positivity_points = 2000;
    std::size_t residual_points = 50;  // per side
    double residual_tol = 1e-6;
    double c1_tol = 1e-9;
};

/// Verifies the glued solution: positivity on a log grid, (1-omega)/omega > Lambda,
/// C^1 matching at x = 1, ODE residual on both sides and G > 0 on [1, x_max].
inline GlueReport verify_glued(const GluedSolution& u, double lambda, const GlueOptions& opt = {}) {
    GlueReport rep;
    for (const double x : log_grid(opt.x_min, opt.x_max, opt.positivity_points)) {
        const double v = u.value(x);
        ++rep.positivity_points;
        if (v < rep.min_value) {
            rep.min_value = v;
            rep.x_at_min = x;
        }
    }
    rep.dominance_margin = (1.0 - u.omega()) / u.omega() - lambda;
    rep.c0_mismatch = std::abs(u.u11(1.0) - (u.omega() * u.u22(1.0) + (1.0 - u.omega()) * u.u21(1.0)));
    rep.c1_mismatch = std::abs(u.derivative(1.0, -1) - u.derivative(1.0, +1));
    for (const double x : log_grid(1e-3, 0.98, opt.residual_points)) {
        rep.max_ode_residual_inner = std::max(rep.max_ode_residual_inner, u.ode_residual(x, 0.01 * x));
    }
    for (const double x : log_grid(1.02, 0.5 * opt.x_max, opt.residual_points)) {
        rep.max_ode_residual_outer = std::max(rep.max_ode_residual_outer, u.ode_residual(x, 0.005 * x));
    }
    rep.G_at_one = u.G(1.0, lambda);
    for (const double x : log_grid(1.0, opt.x_max, opt.positivity_points)) {
        rep.min_G = std::min(rep.min_G, u.G(x, lambda));
    }
    return rep;
}

/// Builds the glued solution and certifies it; throws CheckFailure on a
/// positivity, dominance or matching failure.
inline GluedSolution glue(const HypergeomParams& inner, const HypergeomParams& outer, double lambda,
                          GlueReport* report = nullptr, const GlueOptions& opt = {},
                          double tol = specfun::kDefaultTol) {
    GluedSolution u(inner, outer, tol);
    const GlueReport rep = verify_glued(u, lambda, opt);
    if (report) *report = rep;
    if (!(rep.min_value > 0.0)) throw CheckFailure("glue: glued solution is not positive on the test grid");
    if (!(rep.dominance_margin > 0.0)) throw CheckFailure("glue: (1-omega)/omega does not exceed Lambda");
    if (!(rep.c1_mismatch <= opt.c1_tol) || !(rep.c0_mismatch <= opt.c1_tol)) {
        throw CheckFailure("glue: C^1 matching at x = 1 failed");
    }
    if (!(std::max(rep.max_ode_residual_inner, rep.max_ode_residual_outer) <= opt.residual_tol)) {
        throw CheckFailure("glue: ODE residual exceeds tolerance");
    }
    return u;
}

// ---------------------------------------------------------------------------
// Hardy inequality check
// ---------------------------------------------------------------------------

struct TestFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double support_lo;
    double support_hi;
};

/// C^infinity bump amplitude * exp(1 - 1/(1 - s^2)), s mapping [lo, hi] to [-1, 1].
inline TestFunction smooth_bump(double lo, double hi, double amplitude = 1.0) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    auto value = [=](double r) {
        const double s = (r - mid) / half;
        if (std::abs(s) >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
    };
    auto derivative = [=](double r) {
        const double s = (r - mid) / half;
        if (std::abs(s) >= 1.0) return 0.0;
        const double q = 1.0 - s * s;
        return amplitude * std::exp(1.0 - 1.0 / q) * (-2.0 * s / (q * q)) / half;
    };
    return {value, derivative, lo, hi};
}

/// n bumps with log-uniform inner edge in [2M + 1e-3 M, 300M] and log-uniform
/// relative width, all supported inside (2M, 1000M). Deterministic in seed.
inline std::vector<TestFunction> random_bumps(const BackgroundParams& bg, std::size_t n,
                                              std::uint64_t seed = 20240601) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double m = bg.mass();
    std::vector<TestFunction> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lo = 2.0 * m + m * std::pow(10.0, -3.0 + unit(rng) * std::log10(298.0 / 1e-3));
        const double rel = std::pow(10.0, -2.0 + 2.5 * unit(rng));
        const double hi = std::min(lo * (1.0 + rel), 999.0 * m);
        out.push_back(smooth_bump(lo, hi, 0.5 + unit(rng)));
    }
    return out;
}

struct HardyReport {
    double min_ratio = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0;
    bool all_lhs_nonnegative = true;
    std::vector<double> lhs;
    std::vector<double> rhs;
};

struct HardyOptions {
    double horizon_gap = 1e-8;  // integrate from 2M + gap M
    double r_cut = 1e3;         // in units of M
    std::size_t panels = 400;   // composite Gauss-Legendre panels over each support
};

/// LHS = Int (A phi'^2 + V phi^2) dr and RHS = Int (Delta^2/r^4 phi'^2 + phi^2/r^2) dr
/// with A = M Delta^2/r^4 and V the Regge-Wheeler lower bound or V_joint.
/// Throws CheckFailure if any LHS is negative.
inline HardyReport hardy_check(const BackgroundParams& bg, Kind kind, std::span<const TestFunction> tests,
                               const HardyOptions& opt = {}) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const double m = bg.mass();
    HardyReport rep;
    for (std::size_t k = 0; k < tests.size(); ++k) {
        const auto& phi = tests[k];
        const double lo = std::max(phi.support_lo, bg.horizon_radius() + opt.horizon_gap * m);
        const double hi = std::min(phi.support_hi, opt.r_cut * m);
        double lhs = 0.0, rhs = 0.0;
        if (hi > lo) {
            const double width = (hi - lo) / double(opt.panels);
            for (std::size_t p = 0; p < opt.panels; ++p) {
                const double a = lo + width * double(p);
                const double b = a + width;
                lhs += GL::integrate(
                    [&](double r) {
                        const double delta = bg.delta(r);
                        const double big_a = m * delta * delta / (r * r * r * r);
                        const double v = kind == Kind::ReggeWheeler ? rw_lower_bound(bg, r)
                                                                    : lower_bound_potentials(bg, r).joint;
                        const double d = phi.derivative(r), f = phi.value(r);
                        return big_a * d * d + v * f * f;
                    },
                    a, b);
                rhs += GL::integrate(
                    [&](double r) {
                        const double delta = bg.delta(r);
                        const double d = phi.derivative(r), f = phi.value(r);
                        return delta * delta / (r * r * r * r) * d * d + f * f / (r * r);
                    },
                    a, b);
            }
        }
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        if (lhs < 0.0) rep.all_lhs_nonnegative = false;
        const double ratio = rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
        if (ratio < rep.min_ratio) {
            rep.min_ratio = ratio;
            rep.argmin = k;
        }
    }
    if (!rep.all_lhs_nonnegative) throw CheckFailure("hardy_check: negative Hardy form for a test function");
    return rep;
}

} // namespace rwz::morawetz
