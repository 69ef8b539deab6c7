#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "rwz/evolve.hpp"

using namespace rwz;
using namespace rwz::evolve;

namespace {

const BackgroundParams unit{1.0};
const ModeSpec rw2(2, Kind::ReggeWheeler);

GridSpec small_grid(double h = 0.2) {
    GridSpec g;
    g.h = h;
    g.u_min = -40.0;
    g.u_max = 160.0;
    g.v_min = 0.0;
    g.v_max = 220.0;
    return g;
}

Profile narrow() {
    Profile p;
    p.center = 20.0;
    p.width = 2.0;
    return p;
}

} // namespace

TEST(InitData, ZeroAmplitudeAndOverflow) {
    Profile p = narrow();
    p.amplitude = 0.0;
    const auto d = init_data(small_grid(), p);
    for (const double x : d.row) EXPECT_EQ(x, 0.0);
    for (const double x : d.column) EXPECT_EQ(x, 0.0);
    const auto res = run_evolution(unit, rw2, small_grid(), p);
    for (const double e : res.energy) EXPECT_EQ(e, 0.0);
    for (const double m : res.morawetz_cumulative) EXPECT_EQ(m, 0.0);
    for (const auto& f : res.rp)
        for (const double x : f) EXPECT_EQ(x, 0.0);
    for (const double x : res.extraction.front().psi) EXPECT_EQ(x, 0.0);

    Profile wide = narrow();
    wide.center = 2.0;  // pulse straddles v_min
    EXPECT_THROW(init_data(small_grid(), wide), ConfigError);
    wide.center = 219.0;
    EXPECT_THROW(init_data(small_grid(), wide), ConfigError);
    Profile bad = narrow();
    bad.width = 0.0;
    EXPECT_THROW(init_data(small_grid(), bad), ConfigError);
    GridSpec g = small_grid();
    g.u_max = 160.03;
    EXPECT_THROW(init_data(g, narrow()), ConfigError);
}

TEST(InitData, IngoingAndTimeSymmetric) {
    const auto g = small_grid();
    const auto in = init_data(g, narrow());
    EXPECT_EQ(in.row.size(), std::size_t(g.nv() + 1));
    EXPECT_EQ(in.column.size(), std::size_t(g.nu() + 1));
    EXPECT_EQ(in.row[0], 0.0);
    EXPECT_NEAR(in.row[100], 1.0, 1e-12);  // v = 20
    for (const double x : in.column) EXPECT_EQ(x, 0.0);
    Profile ts = narrow();
    ts.mode = ProfileMode::TimeSymmetric;
    const auto sym = init_data(g, ts);
    EXPECT_NEAR(sym.row[100], 0.5, 1e-12);
    EXPECT_NEAR(sym.column[100], 0.5, 1e-12);  // u = -20
    EXPECT_EQ(sym.column[0], 0.0);
}

TEST(StepDiamond, FlatPotentialIsExact) {
    for (const double h : {0.5, 0.2, 0.1}) {
        DiagnosticOptions opt;
        opt.flat_potential = true;
        Profile p = narrow();
        p.mode = ProfileMode::TimeSymmetric;
        const auto g = small_grid(h);
        const auto field = evolve_field(unit, rw2, g, p, opt);
        const auto data = init_data(g, p);
        double worst = 0.0;
        for (int i = 0; i <= g.nu(); i += 7)
            for (int j = 0; j <= g.nv(); j += 5)
                worst = std::max(worst, std::abs(field(i, j) - (data.row[j] + data.column[i])));
        EXPECT_LE(worst, 1e-13) << "h=" << h;
    }
}

TEST(StepDiamond, UpdateRuleAndNanAbort) {
    std::vector<double> cur{0.0, 1.0, 2.0, 0.5}, next(4, 0.0);
    next[0] = 0.25;
    const std::vector<double> zero(8, 0.0);
    step_diamond(cur, next, 0, 0.1, zero, 4);
    EXPECT_DOUBLE_EQ(next[1], 0.25 + 1.0 - 0.0);
    EXPECT_DOUBLE_EQ(next[2], next[1] + 2.0 - 1.0);
    std::vector<double> pot(8, 2.0);
    std::vector<double> n2(4, 0.0);
    n2[0] = 0.25;
    step_diamond(cur, n2, 0, 0.1, pot, 4);
    EXPECT_DOUBLE_EQ(n2[1], (0.25 + 1.0) - 0.0 - 0.01 / 8 * 2.0 * (0.25 + 1.0));
    std::vector<double> bad(8, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> n3(4, 0.0);
    EXPECT_THROW(step_diamond(cur, n3, 0, 0.1, bad, 4), NumericalAbort);
}

TEST(Evolution, StreamingMatchesStoredLattice) {
    const auto g = small_grid(0.5);
    const auto field = evolve_field(unit, rw2, g, narrow());
    const auto stored = diagnostics(field);
    const auto streamed = run_evolution(unit, rw2, g, narrow());
    ASSERT_EQ(stored.energy.size(), streamed.energy.size());
    for (std::size_t k = 0; k < stored.energy.size(); ++k) {
        EXPECT_EQ(stored.energy[k], streamed.energy[k]);
        EXPECT_EQ(stored.morawetz_cumulative[k], streamed.morawetz_cumulative[k]);
    }
    EXPECT_EQ(stored.extraction.front().psi, streamed.extraction.front().psi);
}

TEST(Energy, PositiveFiniteAndConserved) {
    const auto g = small_grid(0.2);
    const auto field = evolve_field(unit, rw2, g, narrow());
    const double e0 = energy_1p1(field, 0.0);
    EXPECT_GT(e0, 0.0);
    EXPECT_TRUE(std::isfinite(e0));
    const auto res = diagnostics(field);
    for (int k = 0; k <= res.last_complete_slice; ++k) EXPECT_GE(res.energy[k], 0.0);
    EXPECT_THROW(energy_1p1(field, 1e4), DomainError);

    Profile zero = narrow();
    zero.amplitude = 0.0;
    EXPECT_EQ(energy_1p1(evolve_field(unit, rw2, g, zero), 10.0), 0.0);
}

TEST(Energy, DriftIsSecondOrder) {
    std::vector<double> drift;
    for (const double h : {0.2, 0.1}) {
        const auto res = run_evolution(unit, ModeSpec(2, Kind::Zerilli), small_grid(h), narrow());
        drift.push_back(res.energy_drift(0.0, 60.0));
    }
    EXPECT_GT(drift[0], 0.0);
    EXPECT_NEAR(drift[0] / drift[1], 4.0, 0.6);
    EXPECT_LT(drift[0] / (0.2 * 0.2), 0.05);  // measured C = drift / h^2
}

TEST(Energy, IngoingDataHasNoInitialOutgoingFlux) {
    const auto g = small_grid(0.1);
    Profile p = narrow();
    p.center = 100.0;  // far from the potential peak
    GridSpec gg = g;
    gg.u_min = -120.0;
    gg.u_max = 20.0;
    const auto field = evolve_field(unit, rw2, gg, p);
    // on the slice t = 0, compare the outgoing and ingoing parts
    const int k = int(std::lround((0.0 - 0.5 * (gg.u_min + gg.v_min)) / (0.5 * gg.h)));
    double in = 0.0, out = 0.0;
    for (int i = 1; i < gg.nu(); ++i) {
        const int j = k - i;
        if (j < 1 || j >= gg.nv()) continue;
        const double du = (field(i + 1, j) - field(i - 1, j)) / (2 * gg.h);
        const double dv = (field(i, j + 1) - field(i, j - 1)) / (2 * gg.h);
        in += dv * dv;
        out += du * du;
    }
    EXPECT_GT(in, 0.0);
    EXPECT_LT(out / in, 1e-4);
}

TEST(Morawetz, MonotoneAndZeroForZeroData) {
    const auto g = small_grid(0.2);
    const auto res = run_evolution(unit, rw2, g, narrow());
    for (std::size_t k = 1; k < res.morawetz_cumulative.size(); ++k) {
        EXPECT_GE(res.morawetz_cumulative[k], res.morawetz_cumulative[k - 1]);
    }
    const auto field = evolve_field(unit, rw2, g, narrow());
    EXPECT_GT(morawetz_bulk(field, 100.0), morawetz_bulk(field, 20.0));
    EXPECT_EQ(morawetz_bulk(field, -1e3), 0.0);
    Profile zero = narrow();
    zero.amplitude = 0.0;
    EXPECT_EQ(morawetz_bulk(evolve_field(unit, rw2, g, zero), 100.0), 0.0);
}

TEST(Morawetz, RadialDerivativeChainRule) {
    // d_r psi = (d_v - d_u) Psi / (eta r) - Psi / r^2 against a difference of psi along a t-slice
    const auto g = small_grid(0.05);
    GridSpec gg = g;
    gg.u_max = 40.0;
    gg.v_max = 100.0;
    const auto field = evolve_field(unit, rw2, gg, narrow());
    const int k = int(std::lround((30.0 - 0.5 * (gg.u_min + gg.v_min)) / (0.5 * gg.h)));
    int checked = 0;
    for (int i = 2; i < gg.nu() - 1; i += 37) {
        const int j = k - i;
        if (j < 2 || j >= gg.nv() - 1) continue;
        auto r_of = [&](int ii, int jj) { return inverse_tortoise(unit, gg.r_star(jj - ii)); };
        const double r = r_of(i, j);
        const double eta = 1 - 2 / r;
        const double du = (field(i + 1, j) - field(i - 1, j)) / (2 * gg.h);
        const double dv = (field(i, j + 1) - field(i, j - 1)) / (2 * gg.h);
        const double formula = (dv - du) / (eta * r) - field(i, j) / (r * r);
        // neighbours on the same slice: (i-1, j+1) is outward, (i+1, j-1) inward
        const double ro = r_of(i - 1, j + 1), ri = r_of(i + 1, j - 1);
        const double fd = (field(i - 1, j + 1) / ro - field(i + 1, j - 1) / ri) / (ro - ri);
        const double scale = std::abs(dv - du) / (eta * r) + std::abs(field(i, j)) / (r * r);
        if (scale < 1e-3) continue;
        EXPECT_NEAR(formula, fd, 2e-2 * scale) << "r=" << r;
        ++checked;
    }
    EXPECT_GT(checked, 5);
}

TEST(RpFlux, ZeroDataAndErrors) {
    const auto g = small_grid(0.5);
    Profile zero = narrow();
    zero.amplitude = 0.0;
    const auto field = evolve_field(unit, rw2, g, zero);
    for (int p = 0; p <= 2; ++p) EXPECT_EQ(rp_flux(field, 50.0, p), 0.0);
    EXPECT_THROW(rp_flux(field, 50.0, 3), DomainError);
    EXPECT_THROW(rp_flux(field, 1e4, 1), DomainError);
    const auto live = evolve_field(unit, rw2, g, narrow());
    EXPECT_GT(rp_flux(live, 20.0, 2), rp_flux(live, 20.0, 1));
}

TEST(Extract, OnLatticeDiagonalEqualsGridValue) {
    const auto g = small_grid(0.5);
    const auto field = evolve_field(unit, rw2, g, narrow());
    const int d = 40;  // r* = 20 + 10 = 30
    const double r = inverse_tortoise(unit, g.r_star(d));
    const auto series = extract(field, r);
    ASSERT_FALSE(series.t.empty());
    for (int i = 0; i < 50; ++i) {
        const int j = i + d;
        EXPECT_NEAR(series.psi[std::size_t(i)], field(i, j) / r, 1e-12);
        EXPECT_NEAR(series.t[std::size_t(i)], 0.5 * (g.u(i) + g.v(j)), 1e-9);
    }
    EXPECT_THROW(extract(field, 1e5), DomainError);
}

TEST(Convergence, SecondOrderBothKinds) {
    GridSpec g = small_grid(0.2);
    Profile p;
    p.center = 60.0;
    p.width = 12.0;
    g.u_min = -120.0;
    for (const Kind kind : {Kind::ReggeWheeler, Kind::Zerilli}) {
        for (const int ell : {2, 3}) {
            const auto rep = convergence_order(unit, ModeSpec(ell, kind), g, p, 100.0, 10.0);
            EXPECT_FALSE(rep.exact);
            EXPECT_NEAR(rep.order, 2.0, 0.2) << to_string(kind) << " ell=" << ell;
        }
    }
    const auto flat = convergence_order(unit, rw2, g, p, 100.0, 10.0, true);
    EXPECT_TRUE(flat.exact);
    EXPECT_TRUE(std::isinf(flat.order));
}

TEST(Stability, LongRunDoesNotGrow) {
    GridSpec g;
    g.h = 0.1;
    g.u_min = -40.0;
    g.u_max = 1000.0;
    g.v_min = 0.0;
    g.v_max = 1100.0;
    const auto res = run_evolution(unit, rw2, g, narrow());
    const auto& ex = res.extraction.front();
    double late = 0.0;
    for (std::size_t k = 0; k < ex.t.size(); ++k)
        if (ex.t[k] > 900.0) late = std::max(late, std::abs(ex.psi[k]));
    EXPECT_LT(late, 1e-6 * res.peak_abs_psi);
    EXPECT_GT(ex.t.back(), 1000.0);
}

TEST(FitDecay, SyntheticPowerLaw) {
    std::vector<double> t, v;
    for (int k = 0; k <= 2000; ++k) {
        t.push_back(100.0 + k * 0.5);
        v.push_back(std::pow(t.back(), -7.0));
    }
    const auto fit = fit_decay("synthetic", t, v, 300.0, 800.0);
    EXPECT_NEAR(fit.exponent, -7.0, 1e-6);
    EXPECT_LT(fit.stderr_exponent, 1e-6);
    ASSERT_FALSE(fit.local_index.empty());
    for (const double p : fit.local_index) EXPECT_NEAR(p, 7.0, 1e-6);
    EXPECT_EQ(fit.sign_changes, 0);
}

TEST(FitDecay, GuardsAndErrors) {
    std::vector<double> t, ring, tiny;
    for (int k = 0; k <= 2000; ++k) {
        t.push_back(100.0 + k * 0.5);
        ring.push_back(std::pow(t.back(), -3.0) * std::sin(0.3 * t.back()));
        tiny.push_back(k == 0 ? 1.0 : 1e-14 * std::pow(t.back(), -1.0));
    }
    EXPECT_THROW(fit_decay("ring", t, ring, 300.0, 800.0), CheckFailure);
    EXPECT_THROW(fit_decay("floor", t, tiny, 300.0, 800.0), CheckFailure);
    EXPECT_THROW(fit_decay("window", t, tiny, 50.0, 800.0), DomainError);
    EXPECT_THROW(fit_decay("window", t, tiny, 800.0, 300.0), DomainError);
    EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {1, 0.25, 1.0 / 16, 1.0 / 64}), -2.0, 1e-12);
}
