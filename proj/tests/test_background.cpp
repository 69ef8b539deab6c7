#include <gtest/gtest.h>

#include <cmath>

#include "rwz/background.hpp"

using namespace rwz;

namespace {

const BackgroundParams unit{1.0};

// Standard Zerilli potential written independently of zeta:
// eta [2 l^2 (l+1) r^3 + 6 l^2 M r^2 + 18 l M^2 r + 18 M^3] / (r^3 (l r + 3M)^2).
double zerilli_reference(double m, int ell, double r) {
    const double l = 0.5 * (ell - 1) * (ell + 2);
    const double num = 2 * l * l * (l + 1) * r * r * r + 6 * l * l * m * r * r + 18 * l * m * m * r + 18 * m * m * m;
    const double den = r * r * r * (l * r + 3 * m) * (l * r + 3 * m);
    return (1 - 2 * m / r) * num / den;
}

} // namespace

TEST(Background, ParamsAndMode) {
    const BackgroundParams bg(2.5);
    EXPECT_DOUBLE_EQ(bg.horizon_radius(), 5.0);
    EXPECT_DOUBLE_EQ(bg.photon_sphere_radius(), 7.5);
    EXPECT_DOUBLE_EQ(bg.delta(10.0), 50.0);
    EXPECT_THROW(BackgroundParams(0.0), DomainError);
    EXPECT_THROW(BackgroundParams(-1.0), DomainError);
    EXPECT_THROW(ModeSpec(1, Kind::ReggeWheeler), DomainError);
    for (int ell = 2; ell <= 10; ++ell) {
        const ModeSpec mode(ell, Kind::Zerilli);
        EXPECT_EQ(2.0 * mode.lambda_bar(), ell * (ell + 1) - 2.0);
        EXPECT_GE(mode.lambda_bar(), 2.0);
    }
}

TEST(Tortoise, SpotValues) {
    EXPECT_NEAR(tortoise(unit, 3.0), 0.0, 1e-15);
    const double r_near = 2.0 + 1e-6, x_near = r_near - 2.0;  // exact difference
    EXPECT_NEAR(tortoise(unit, r_near), -1.0 + x_near + 2.0 * std::log(x_near), 1e-12);
    EXPECT_NEAR(tortoise(unit, 2.0 + 1e-6), -28.631, 1e-3);
    EXPECT_NEAR(tortoise(unit, 100.0), 97.0 + 2.0 * std::log(98.0), 1e-12);
    EXPECT_NEAR(tortoise(unit, 100.0), 106.17, 1e-2);
    EXPECT_THROW(tortoise(unit, 2.0), DomainError);
    EXPECT_THROW(tortoise(unit, 1.0), DomainError);
    // mass scaling: r*(M, r) = M r*(1, r/M)
    const BackgroundParams bg(3.0);
    EXPECT_NEAR(tortoise(bg, 12.0), 3.0 * tortoise(unit, 4.0), 1e-13);
}

TEST(Tortoise, InverseSpotValues) {
    EXPECT_NEAR(inverse_tortoise(unit, 0.0), 3.0, 1e-14);
    EXPECT_NEAR(inverse_tortoise(unit, tortoise(unit, 100.0)), 100.0, 1e-10);
    const double r = inverse_tortoise(unit, -50.0);
    EXPECT_GT(r - 2.0, 0.0);
    EXPECT_LT(r - 2.0, 1e-10);
    // asymptotic form of the offset, checked through the offset itself
    const double x = horizon_offset(unit, -50.0);
    EXPECT_NEAR(tortoise_from_offset(unit, x), -50.0, 1e-12 * 50.0);
    EXPECT_GT(inverse_tortoise(unit, -1e4), 2.0);
    EXPECT_GT(horizon_offset(unit, -1e3), 0.0);
    EXPECT_NEAR(tortoise_from_offset(unit, horizon_offset(unit, -1e3)), -1e3, 1e-12 * 1e3);
    EXPECT_THROW(horizon_offset(unit, std::nan("")), DomainError);
}

TEST(Tortoise, RoundTripAndMonotone) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
        const double x = std::exp(std::log(1e-8) + (std::log(1e6) - std::log(1e-8)) * k / 999.0);
        const double r = 2.0 + x;
        const double rs = tortoise_from_offset(unit, x);
        EXPECT_GT(rs, prev);
        prev = rs;
        const double back = horizon_offset(unit, rs);
        EXPECT_NEAR(back / x, 1.0, 1e-10) << "x=" << x;
        EXPECT_NEAR(tortoise_from_offset(unit, back), rs, 1e-12 * std::max(1.0, std::abs(rs)));
        if (x > 1e-4) { EXPECT_NEAR(inverse_tortoise(unit, rs) / r, 1.0, 1e-10); }
    }
}

TEST(Zeta, AnchoredValues) {
    const ModeSpec l2(2, Kind::Zerilli);
    EXPECT_NEAR(zeta(unit, l2, 2.0), -3.0 / 14.0, 1e-15);
    EXPECT_NEAR(zeta(unit, l2, 3.0), -1.0 / 36.0, 1e-15);
    EXPECT_NEAR(zeta(unit, l2, 1e9), 0.75, 1e-8);
    EXPECT_THROW(zeta(unit, ModeSpec(2, Kind::ReggeWheeler), 3.0), DomainError);
    EXPECT_THROW(zeta(unit, l2, 1.5), DomainError);
}

TEST(Zeta, MonotoneAndBounded) {
    for (int ell = 2; ell <= 10; ++ell) {
        const ModeSpec mode(ell, Kind::Zerilli);
        const double lam = mode.lambda_bar();
        const double lo = -3.0 / (2.0 * (2.0 * lam + 3.0)), hi = 3.0 / (2.0 * lam);
        double prev = -1e300;
        for (int k = 0; k <= 2000; ++k) {
            const double r = 2.0 * std::pow(5e3, k / 2000.0);
            const double z = zeta(unit, mode, r);
            EXPECT_GT(z, prev);
            EXPECT_GE(z, lo - 1e-15);
            EXPECT_LE(z, hi + 1e-15);
            prev = z;
            const double dh = 1e-5 * r;
            // second-order one-sided stencil where r - dh would cross the horizon
            const double fd = r - dh < 2.0
                                  ? (-3.0 * z + 4.0 * zeta(unit, mode, r + dh) - zeta(unit, mode, r + 2.0 * dh)) / (2.0 * dh)
                                  : (zeta(unit, mode, r + dh) - zeta(unit, mode, r - dh)) / (2.0 * dh);
            EXPECT_GT(fd, 0.0);
            EXPECT_NEAR(zeta_derivative(unit, mode, r), fd, 1e-6 * std::abs(fd) + 1e-14);
        }
    }
}

TEST(Potential4d, SpotValuesAndTwoForms) {
    EXPECT_NEAR(-8.0 / 8.0, potential_4d(unit, ModeSpec(2, Kind::ReggeWheeler), std::nextafter(2.0, 3.0)), 1e-14);
    EXPECT_NEAR(potential_4d(unit, ModeSpec(2, Kind::Zerilli), std::nextafter(2.0, 3.0)), -11.0 / 14.0, 1e-14);
    const double big = potential_4d(unit, ModeSpec(2, Kind::ReggeWheeler), 1e3);
    EXPECT_NEAR(big * 1e9, -8.0, 1e-12);
    for (int ell = 2; ell <= 10; ++ell) {
        const ModeSpec mode(ell, Kind::Zerilli);
        for (int k = 0; k <= 200; ++k) {
            const double r = 2.0 * std::pow(1e4, k / 200.0) + 1e-9;
            const double a = potential_4d(unit, mode, r);
            const double b = zerilli_potential_rational(unit, mode, r);
            EXPECT_NEAR(a, b, 1e-13 * std::abs(b));
        }
    }
}

TEST(Potential1p1, SpotValues) {
    const ModeSpec rw(2, Kind::ReggeWheeler);
    EXPECT_NEAR(potential_1p1(unit, rw, 3.0), 4.0 / 27.0, 1e-15);
    for (const Kind kind : {Kind::ReggeWheeler, Kind::Zerilli}) {
        EXPECT_NEAR(potential_1p1_from_offset(unit, ModeSpec(2, kind), 1e-300), 0.0, 1e-290);
    }
    EXPECT_THROW(potential_1p1(unit, rw, 2.0), DomainError);
}

TEST(Potential1p1, MatchesStandardZerilliForm) {
    for (const double m : {1.0, 0.5, 3.0}) {
        const BackgroundParams bg(m);
        for (int ell = 2; ell <= 6; ++ell) {
            for (int k = 0; k <= 100; ++k) {
                const double r = 2.0 * m * (1.0 + 1e-3 * std::pow(1e6, k / 100.0));
                const double ref = zerilli_reference(m, ell, r);
                EXPECT_NEAR(potential_1p1(bg, ModeSpec(ell, Kind::Zerilli), r), ref, 1e-13 * std::abs(ref));
            }
        }
    }
}

TEST(Potential1p1, PositiveOutsideHorizon) {
    for (int ell = 2; ell <= 10; ++ell) {
        for (const Kind kind : {Kind::ReggeWheeler, Kind::Zerilli}) {
            const ModeSpec mode(ell, kind);
            for (int k = 0; k <= 1000; ++k) {
                const double x = std::pow(10.0, -10.0 + 16.0 * k / 1000.0);
                EXPECT_GT(potential_1p1_from_offset(unit, mode, x), 0.0) << ell << " " << x;
            }
        }
    }
}
