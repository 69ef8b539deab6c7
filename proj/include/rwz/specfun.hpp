#pragma once
// Gauss hypergeometric function 2F1(a,b;c;z) for real parameters and real
// z <= 0. Three independent evaluation routes are exposed so they can be
// checked against each other: the Gauss series, the Pfaff-transformed series
// and Euler's integral representation.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "rwz/errors.hpp"

namespace rwz::specfun {

inline constexpr double kDefaultTol = 1e-12;
inline constexpr long kMaxSeriesTerms = 100000;

/// Default tolerance, overridable through the RWZ_TOL environment variable.
inline double default_tolerance() {
    if (const char* env = std::getenv("RWZ_TOL")) {
        char* end = nullptr;
        const double tol = std::strtod(env, &end);
        if (end != env && tol > 0.0 && std::isfinite(tol)) return tol;
    }
    return kDefaultTol;
}

struct Hyp2F1Args {
    double a;
    double b;
    double c;
    double z;
};

namespace detail {

inline bool near_integer(double x, double tol = 1e-9) {
    return std::abs(x - std::nearbyint(x)) <= tol;
}

inline void require_valid_c(double c, const char* who) {
    if (c <= 0.0 && near_integer(c, 1e-14)) {
        throw DomainError(std::string(who) + ": c must not be a non-positive integer");
    }
}

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
        else comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Sum_{n} (a)_n (b)_n / ((c)_n n!) z^n, stopping once a geometric bound on the
/// remaining tail drops below tol * |sum|.
inline double series_sum(double a, double b, double c, double z, double tol, long max_terms) {
    CompensatedSum sum;
    double term = 1.0;
    sum.add(term);
    const double az = std::abs(z);
    for (long n = 0; n < max_terms; ++n) {
        const double dn = static_cast<double>(n);
        const double ratio = (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * z;
        term *= ratio;
        if (term == 0.0) return sum.value();  // terminating (polynomial) case
        sum.add(term);
        // Once n exceeds the parameter scales, |ratio| increases monotonically
        // towards |z| (or decreases to it); the tail is bounded by a geometric series.
        if (dn > std::abs(a) + std::abs(b) + std::abs(c) + 2.0) {
            const double rho = std::max(std::abs(ratio), az);
            if (rho < 1.0) {
                const double tail = std::abs(term) * rho / (1.0 - rho);
                if (tail <= tol * std::abs(sum.value())) return sum.value();
            }
        }
    }
    throw ConvergenceError("2F1 series: no convergence within " + std::to_string(max_terms) + " terms");
}

} // namespace detail

/// Gauss series. Requires |z| < 1.
inline double gauss_series(const Hyp2F1Args& args, double tol = kDefaultTol,
                           long max_terms = kMaxSeriesTerms) {
    detail::require_valid_c(args.c, "gauss_series");
    if (!(std::abs(args.z) < 1.0)) {
        throw ConvergenceError("gauss_series: requires |z| < 1");
    }
    return detail::series_sum(args.a, args.b, args.c, args.z, tol, max_terms);
}

/// Pfaff route: F(a,b;c;z) = (1-z)^{-a} F(a, c-b; c; z/(z-1)), evaluated by
/// the Gauss series in w = z/(z-1) in [0,1) for z <= 0.
inline double pfaff_series(const Hyp2F1Args& args, double tol = kDefaultTol,
                           long max_terms = kMaxSeriesTerms) {
    detail::require_valid_c(args.c, "pfaff_series");
    if (args.z > 0.0) throw DomainError("pfaff_series: requires z <= 0");
    const double w = args.z / (args.z - 1.0);
    const double f = detail::series_sum(args.a, args.c - args.b, args.c, w, tol, max_terms);
    return std::pow(1.0 - args.z, -args.a) * f;
}

/// Connection formula around w = 1 applied to the Pfaff-transformed function:
/// F(A,B;C;w) = G1 F(A,B;A+B-C+1;1-w) + (1-w)^{C-A-B} G2 F(C-A,C-B;C-A-B+1;1-w).
/// With A = a, B = c - b, C = c this needs b - a to be non-integer.
inline double pfaff_connection(const Hyp2F1Args& args, double tol = kDefaultTol) {
    detail::require_valid_c(args.c, "pfaff_connection");
    if (args.z > 0.0) throw DomainError("pfaff_connection: requires z <= 0");
    const double big_a = args.a;
    const double big_b = args.c - args.b;
    const double big_c = args.c;
    const double gap = big_c - big_a - big_b;  // = b - a
    if (detail::near_integer(gap, 1e-6)) {
        throw DomainError("pfaff_connection: b - a is (nearly) an integer");
    }
    const double one_minus_w = 1.0 / (1.0 - args.z);
    const double g1 = std::tgamma(big_c) * std::tgamma(gap) /
                      (std::tgamma(big_c - big_a) * std::tgamma(big_c - big_b));
    const double g2 = std::tgamma(big_c) * std::tgamma(-gap) /
                      (std::tgamma(big_a) * std::tgamma(big_b));
    const double f1 = detail::series_sum(big_a, big_b, 1.0 - gap, one_minus_w, tol, kMaxSeriesTerms);
    const double f2 = detail::series_sum(big_c - big_a, big_c - big_b, 1.0 + gap, one_minus_w, tol,
                                         kMaxSeriesTerms);
    // 1/(Gamma) vanishes at poles; tgamma returns +-inf there, giving 0 here.
    const double term1 = std::isfinite(g1) ? g1 * f1 : 0.0;
    const double term2 = std::isfinite(g2) ? g2 * std::pow(one_minus_w, gap) * f2 : 0.0;
    return std::pow(1.0 - args.z, -args.a) * (term1 + term2);
}

/// Euler integral representation, valid for 0 < b < c and z not in [1, inf):
/// Gamma(c)/(Gamma(b)Gamma(c-b)) Int_0^1 t^{b-1}(1-t)^{c-b-1}(1-zt)^{-a} dt.
/// tanh-sinh copes with the algebraic endpoint singularities; the complement
/// argument keeps 1 - t accurate near the right end.
inline double integral_rep(const Hyp2F1Args& args, double tol = kDefaultTol) {
    const double a = args.a, b = args.b, c = args.c, z = args.z;
    if (!(b > 0.0) || !(c > b)) {
        throw DomainError("integral_rep: requires 0 < b < c");
    }
    if (z >= 1.0) throw DomainError("integral_rep: z must not lie in [1, inf)");

    static thread_local boost::math::quadrature::tanh_sinh<double> quad(15);
    const double d = c - b;
    auto f = [&](double t, double tc) {
        const double t1 = t <= 0.5 ? 1.0 - t : std::abs(tc);
        const double t0 = t <= 0.5 ? t : 1.0 - t1;
        return std::pow(t0, b - 1.0) * std::pow(t1, d - 1.0) * std::pow(1.0 - z * t0, -a);
    };
    const double quad_tol = std::max(0.01 * tol, 1e-15);
    const double integral = quad.integrate(f, 0.0, 1.0, quad_tol);
    const double log_norm = std::lgamma(c) - std::lgamma(b) - std::lgamma(d);
    return std::exp(log_norm) * integral;
}

/// Dispatching evaluator for z <= 0:
///   |z| <= 1/2            Gauss series
///   w = z/(z-1) <= 0.9    Pfaff series
///   w > 0.9               connection formula about w = 1 (Pfaff series with
///                         a larger term budget when b - a is an integer)
inline double eval_2f1(const Hyp2F1Args& args, double tol = kDefaultTol) {
    detail::require_valid_c(args.c, "eval_2f1");
    if (args.z > 0.0) throw DomainError("eval_2f1: requires z <= 0");
    if (args.z >= -0.5) return gauss_series(args, tol);
    const double w = args.z / (args.z - 1.0);
    if (w <= 0.9) return pfaff_series(args, tol);
    if (!detail::near_integer(args.b - args.a, 1e-6)) return pfaff_connection(args, tol);
    return pfaff_series(args, tol, 100 * kMaxSeriesTerms);
}

/// dF/dz = (ab/c) F(a+1, b+1; c+1; z).
inline double eval_2f1_dz(const Hyp2F1Args& args, double tol = kDefaultTol) {
    if (args.a * args.b == 0.0) return 0.0;
    return args.a * args.b / args.c *
           eval_2f1({args.a + 1.0, args.b + 1.0, args.c + 1.0, args.z}, tol);
}

} // namespace rwz::specfun
