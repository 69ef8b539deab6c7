#pragma once
// Schwarzschild exterior: tortoise coordinate and the Regge-Wheeler / Zerilli
// potentials, both as 4D potentials V_g in (Box_g - V_g) psi = 0 and as the
// mode-decomposed 1+1 potentials acting on Psi = r psi.

#include <cmath>
#include <limits>
#include <string>

#include "rwz/errors.hpp"

namespace rwz {

class BackgroundParams {
public:
    explicit BackgroundParams(double mass = 1.0) : mass_(mass) {
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            throw DomainError("BackgroundParams: mass must be positive and finite");
        }
    }

    double mass() const noexcept { return mass_; }
    double horizon_radius() const noexcept { return 2.0 * mass_; }
    double photon_sphere_radius() const noexcept { return 3.0 * mass_; }

    double mu(double r) const noexcept { return 2.0 * mass_ / r; }
    double eta(double r) const noexcept { return 1.0 - 2.0 * mass_ / r; }
    double delta(double r) const noexcept { return r * r - 2.0 * mass_ * r; }

private:
    double mass_;
};

enum class Kind { ReggeWheeler, Zerilli };

inline std::string to_string(Kind kind) {
    return kind == Kind::ReggeWheeler ? "rw" : "zerilli";
}

class ModeSpec {
public:
    ModeSpec(int ell, Kind kind) : ell_(ell), kind_(kind) {
        if (ell < 2) {
            throw DomainError("ModeSpec: only gravitational modes ell >= 2 are supported");
        }
    }

    int ell() const noexcept { return ell_; }
    Kind kind() const noexcept { return kind_; }
    /// (ell-1)(ell+2)/2, i.e. 2*lambda_bar = ell(ell+1) - 2.
    double lambda_bar() const noexcept { return 0.5 * (ell_ - 1) * (ell_ + 2); }
    double angular_eigenvalue() const noexcept { return double(ell_) * (ell_ + 1); }

private:
    int ell_;
    Kind kind_;
};

namespace detail {

inline void require_exterior(const BackgroundParams& bg, double r, const char* who) {
    if (!(r > bg.horizon_radius())) {
        throw DomainError(std::string(who) + ": requires r > 2M");
    }
}

} // namespace detail

/// r* = r + 2M ln(r - 2M) - 3M - 2M ln M, normalised so that r*(3M) = 0.
inline double tortoise(const BackgroundParams& bg, double r) {
    detail::require_exterior(bg, r, "tortoise");
    const double m = bg.mass();
    return r + 2.0 * m * std::log(r - 2.0 * m) - 3.0 * m - 2.0 * m * std::log(m);
}

/// Tortoise coordinate written in terms of the horizon offset x = r - 2M.
inline double tortoise_from_offset(const BackgroundParams& bg, double x) {
    if (!(x > 0.0)) {
        throw DomainError("tortoise_from_offset: requires r - 2M > 0");
    }
    const double m = bg.mass();
    return x + 2.0 * m * std::log(x) - m - 2.0 * m * std::log(m);
}

/// Inverse tortoise map returning x = r - 2M > 0. Works for any finite r*;
/// near the horizon x ~ exp(r*/2M) stays representable long after 2M + x
/// rounds to 2M.
///
/// Newton iteration in y = ln x: g(y) = e^y + 2M y + const is convex and
/// increasing, so one step lands right of the root and the iterates then
/// decrease monotonically. A bracket is kept and bisection takes over if a
/// step leaves it.
inline double horizon_offset(const BackgroundParams& bg, double r_star) {
    if (!std::isfinite(r_star)) {
        throw DomainError("horizon_offset: r* must be finite");
    }
    const double m = bg.mass();
    const double shift = r_star + m + 2.0 * m * std::log(m);  // r* + M + 2M ln M
    auto g = [&](double y) { return std::exp(y) + 2.0 * m * y - shift; };

    // Initial guess: r ~ r* far out, x ~ exp((r* + M + 2M ln M)/2M) near the horizon.
    double y = r_star > 0.0 ? std::log(std::max(r_star, m)) : shift / (2.0 * m);

    // Bracket [lo, hi] with g(lo) < 0 < g(hi).
    double lo = std::min(y, shift / (2.0 * m)) - 1.0;
    while (g(lo) > 0.0) lo -= 2.0 * (1.0 + std::abs(lo));
    double hi = std::max(y, std::log(std::abs(shift) + 2.0 * m)) + 1.0;
    while (g(hi) < 0.0) hi += 2.0 * (1.0 + std::abs(hi));

    const double target_tol = 1e-14 * std::max(1.0, std::abs(r_star));
    for (int iter = 0; iter < 200; ++iter) {
        const double gy = g(y);
        if (std::abs(gy) <= target_tol) return std::exp(y);
        if (gy < 0.0) lo = y; else hi = y;
        double next = y - gy / (std::exp(y) + 2.0 * m);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == y || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) {
            return std::exp(next);
        }
        y = next;
    }
    throw ConvergenceError("horizon_offset: Newton/bisection failed to converge");
}

/// Inverse tortoise map r(r*). For r* below roughly -70M the exact answer is
/// closer to 2M than one ulp; the smallest double above 2M is returned then.
inline double inverse_tortoise(const BackgroundParams& bg, double r_star) {
    const double two_m = bg.horizon_radius();
    const double r = two_m + horizon_offset(bg, r_star);
    return r > two_m ? r : std::nextafter(two_m, std::numeric_limits<double>::infinity());
}

/// zeta(r) with V_g^Z = V_g^RW (1 + zeta). Defined for r >= 2M.
inline double zeta(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    if (mode.kind() != Kind::Zerilli) {
        throw DomainError("zeta: only defined for the Zerilli equation");
    }
    if (!(r >= bg.horizon_radius())) {
        throw DomainError("zeta: requires r >= 2M");
    }
    const double m = bg.mass();
    const double lam = mode.lambda_bar();
    const double big_lambda = lam * r + 3.0 * m;
    const double s = 0.5 - m / big_lambda;
    return (2.0 * lam + 3.0) / (4.0 * lam) * (9.0 * s * s - 0.25) - 1.0;
}

/// d zeta / dr = (9M(2 lambda_bar + 3)/2) (1/2 - M/Lambda) / Lambda^2.
inline double zeta_derivative(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    const double m = bg.mass();
    const double lam = mode.lambda_bar();
    const double big_lambda = lam * r + 3.0 * m;
    return 4.5 * m * (2.0 * lam + 3.0) * (0.5 - m / big_lambda) / (big_lambda * big_lambda);
}

/// Zerilli potential in its rational form
/// -8M/r^3 * (2 lambda + 3)(2 lambda r + 3M) r / (4 (lambda r + 3M)^2).
inline double zerilli_potential_rational(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    const double m = bg.mass();
    const double lam = mode.lambda_bar();
    const double big_lambda = lam * r + 3.0 * m;
    return -8.0 * m / (r * r * r) * (2.0 * lam + 3.0) * (2.0 * lam * r + 3.0 * m) * r /
           (4.0 * big_lambda * big_lambda);
}

/// V_g: -8M/r^3 for Regge-Wheeler, -8M/r^3 (1 + zeta) for Zerilli.
inline double potential_4d(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    detail::require_exterior(bg, r, "potential_4d");
    const double rw = -8.0 * bg.mass() / (r * r * r);
    if (mode.kind() == Kind::ReggeWheeler) return rw;
    return rw * (1.0 + zeta(bg, mode, r));
}

/// 1+1 potential for Psi = r psi given the horizon offset x = r - 2M:
/// V = eta (ell(ell+1)/r^2 + Vhat), Vhat = -6M/r^3 (RW) or -6M/r^3 - 8M zeta/r^3 (Z).
inline double potential_1p1_from_offset(const BackgroundParams& bg, const ModeSpec& mode, double x) {
    const double m = bg.mass();
    const double r = x + 2.0 * m;
    const double eta = x / r;
    const double r3 = r * r * r;
    double vhat = -6.0 * m / r3;
    if (mode.kind() == Kind::Zerilli) vhat -= 8.0 * m * zeta(bg, mode, r) / r3;
    return eta * (mode.angular_eigenvalue() / (r * r) + vhat);
}

inline double potential_1p1(const BackgroundParams& bg, const ModeSpec& mode, double r) {
    detail::require_exterior(bg, r, "potential_1p1");
    return potential_1p1_from_offset(bg, mode, r - bg.horizon_radius());
}

} // namespace rwz
