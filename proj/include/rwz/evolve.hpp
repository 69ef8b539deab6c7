#pragma once
// Double-null (diamond) evolution of the 1+1 Regge-Wheeler / Zerilli equation
// d_u d_v Psi + (1/4) V Psi = 0 in u = t - r*, v = t + r*, with the diagnostics
// used to certify decay: slice energy, interior non-degenerate energy,
// Morawetz bulk integral, r^p fluxes on outgoing cones and extraction of psi
// at fixed radius, plus log-log decay fitting.
//
// Lattice: u_i = u_min + i h, v_j = v_min + j h. Row i is the cone u = u_i.
// Constant-t slices are anti-diagonals i + j = k, t_k = (u_min + v_min)/2 + k h/2,
// with r* spacing h along the slice. Everything on a diagonal d = j - i shares
// one radius, so r, V and the diagnostic weights are cached per diagonal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rwz/background.hpp"
#include "rwz/errors.hpp"

namespace rwz::evolve {

struct GridSpec {
    double h = 0.05;
    double u_min = -120.0;
    double u_max = 1600.0;
    double v_min = 0.0;
    double v_max = 1800.0;

    int nu() const { return int(std::lround((u_max - u_min) / h)); }
    int nv() const { return int(std::lround((v_max - v_min) / h)); }
    double u(int i) const { return u_min + i * h; }
    double v(int j) const { return v_min + j * h; }
    /// r* of lattice points on diagonal d = j - i (also the diamond centre of cells with south corner on d).
    double r_star(int d) const { return 0.5 * (v_min - u_min) + 0.5 * d * h; }
    double slice_time(int k) const { return 0.5 * (u_min + v_min) + 0.5 * k * h; }

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid: h must be positive");
        if (!(u_max > u_min) || !(v_max > v_min)) throw ConfigError("grid: empty u or v range");
        const double su = (u_max - u_min) / h, sv = (v_max - v_min) / h;
        if (std::abs(su - std::round(su)) > 1e-6 || std::abs(sv - std::round(sv)) > 1e-6) {
            throw ConfigError("grid: u and v ranges must be integer multiples of h");
        }
        if (nu() < 2 || nv() < 2) throw ConfigError("grid: need at least 2 steps in u and v");
    }
};

enum class ProfileMode { Ingoing, TimeSymmetric };

/// Gaussian pulse A exp(-(r* - center)^2 / width^2) at t = 0.
struct Profile {
    double center = 60.0;
    double width = 12.0;
    double amplitude = 1.0;
    ProfileMode mode = ProfileMode::Ingoing;

    double g(double r_star) const {
        const double s = (r_star - center) / width;
        return amplitude * std::exp(-s * s);
    }
};

struct DiagnosticOptions {
    double r_nh = 2.5;    // inner edge of the interior energy region (units M)
    double R = 10.0;      // outer edge of the interior region, inner edge of the r^p flux integrals
    double r_bar = 0.5;   // photon-sphere band half width excluded from the Morawetz indicator term
    std::vector<double> extraction_radii{10.0};
    bool flat_potential = false;  // V = 0: exact d'Alembert propagation
};

/// Per-diagonal cache of radius-dependent quantities.
struct DiagonalCache {
    std::vector<double> r, x, eta, V;
    std::vector<unsigned char> interior, photon_band, far;

    DiagonalCache(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& grid,
                  const DiagnosticOptions& opt) {
        const int n = grid.nu() + grid.nv() + 1;
        r.resize(n); x.resize(n); eta.resize(n); V.resize(n);
        interior.resize(n); photon_band.resize(n); far.resize(n);
        const double m = bg.mass();
        for (int idx = 0; idx < n; ++idx) {
            const int d = idx - grid.nu();
            x[idx] = horizon_offset(bg, grid.r_star(d));
            r[idx] = 2.0 * m + x[idx];
            eta[idx] = x[idx] / r[idx];
            V[idx] = opt.flat_potential ? 0.0 : potential_1p1_from_offset(bg, mode, x[idx]);
            interior[idx] = r[idx] >= opt.r_nh * m && r[idx] <= opt.R * m;
            photon_band[idx] = std::abs(r[idx] - 3.0 * m) <= opt.r_bar * m;
            far[idx] = r[idx] >= opt.R * m;
        }
    }
};

/// Boundary data on the row u = u_min (length nv+1) and the column v = v_min
/// (length nu+1). The constant corner value is subtracted so the data vanish
/// at the corner. Throws ConfigError if the pulse is not contained in the
/// initial null segments (tails above 1e-10 of the amplitude at their far ends);
/// a causal sub-rectangle skips that check via require_contained = false.
struct InitialData {
    std::vector<double> row;
    std::vector<double> column;
};

inline InitialData init_data(const GridSpec& grid, const Profile& p, bool require_contained = true) {
    grid.validate();
    if (!(p.width > 0.0) || !std::isfinite(p.center) || !std::isfinite(p.amplitude)) {
        throw ConfigError("profile: width must be positive and center/amplitude finite");
    }
    const double tail = 1e-10 * std::abs(p.amplitude);
    // Ingoing: Psi = g(v). Time symmetric: Psi = (g(v) + g(-u))/2.
    const double half = p.mode == ProfileMode::Ingoing ? 1.0 : 0.5;
    if (require_contained && (std::abs(half * p.g(grid.v_min)) > tail || std::abs(half * p.g(grid.v_max)) > tail)) {
        throw ConfigError("profile overflows the grid: pulse not contained in v range of the initial cone");
    }
    if (require_contained && p.mode == ProfileMode::TimeSymmetric &&
        (std::abs(half * p.g(-grid.u_min)) > tail || std::abs(half * p.g(-grid.u_max)) > tail)) {
        throw ConfigError("profile overflows the grid: pulse not contained in u range of the initial cone");
    }
    InitialData data;
    data.row.resize(grid.nv() + 1);
    data.column.assign(grid.nu() + 1, 0.0);
    for (int j = 0; j <= grid.nv(); ++j) data.row[j] = half * (p.g(grid.v(j)) - p.g(grid.v_min));
    if (p.mode == ProfileMode::TimeSymmetric) {
        for (int i = 0; i <= grid.nu(); ++i) data.column[i] = half * (p.g(-grid.u(i)) - p.g(-grid.u_min));
    }
    return data;
}

/// Computes row i+1 from row i (next[0] must already hold the boundary value):
/// Psi_N = Psi_W + Psi_E - Psi_S - (h^2/8) V_c (Psi_W + Psi_E).
/// V_by_diag is indexed by d + nu. Throws NumericalAbort on a non-finite value.
inline void step_diamond(const std::vector<double>& cur, std::vector<double>& next, int i, double h,
                         const std::vector<double>& V_by_diag, int nu) {
    const int nv = int(cur.size()) - 1;
    const double c = h * h / 8.0;
    const double* vd = V_by_diag.data() + (nu - i);
    double check = 0.0;
    for (int j = 0; j < nv; ++j) {
        const double we = next[j] + cur[j + 1];
        next[j + 1] = we - cur[j] - c * vd[j] * we;
        check += std::abs(next[j + 1]);
    }
    if (!std::isfinite(check)) {
        throw NumericalAbort("step_diamond: non-finite value on row " + std::to_string(i + 1));
    }
}

struct ExtractionSeries {
    double radius = 0.0;
    std::vector<double> t, psi, dtpsi;
};

struct EvolutionResult {
    GridSpec grid;
    std::vector<double> slice_t;
    std::vector<double> energy;               // E on slice t (complete for slices reaching both initial cones)
    std::vector<double> energy_n_interior;    // non-degenerate energy over r_nh <= r <= R
    std::vector<double> morawetz_cumulative;  // bulk integral over lattice points with t' <= t
    int last_complete_slice = 0;              // slices k <= this are bounded by the initial cones only
    std::vector<double> cone_u;
    std::array<std::vector<double>, 3> rp;    // r^p flux of d_v Psi over r >= R on cone u, p = 0,1,2
    std::vector<double> cone_sup;             // sup over the cone of r^{1/2} |psi|, r >= R
    std::vector<ExtractionSeries> extraction;
    double peak_abs_psi = 0.0;

    /// Linear interpolation of a slice quantity in t.
    static double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
        if (xs.empty() || x < xs.front() || x > xs.back()) {
            throw DomainError("evolution result: requested time outside the computed domain");
        }
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end()) return ys.back();
        const std::size_t k = std::size_t(it - xs.begin());
        if (k == 0) return ys.front();
        const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        return (1.0 - w) * ys[k - 1] + w * ys[k];
    }
    double energy_at(double t) const { return interp(slice_t, energy, t); }
    double energy_n_at(double t) const { return interp(slice_t, energy_n_interior, t); }
    double morawetz_at(double t) const { return interp(slice_t, morawetz_cumulative, t); }
    double rp_at(double u, int p) const { return interp(cone_u, rp.at(std::size_t(p)), u); }

    /// max |E(t) - E(t0)| / E(t0) over complete slices with t in [t0, t1].
    double energy_drift(double t0, double t1) const {
        const double e0 = energy_at(t0);
        double drift = 0.0;
        for (int k = 0; k <= last_complete_slice && k < int(slice_t.size()); ++k) {
            if (slice_t[k] < t0 || slice_t[k] > t1) continue;
            drift = std::max(drift, std::abs(energy[k] - e0));
        }
        return e0 > 0.0 ? drift / e0 : drift;
    }
};

/// Accumulates all diagnostics row by row; used by both the streaming
/// evolution and the stored-lattice path.
class DiagnosticsAccumulator {
public:
    DiagnosticsAccumulator(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& grid,
                           const DiagnosticOptions& opt, const DiagonalCache& cache)
        : grid_(grid), cache_(cache), ell_term_(mode.angular_eigenvalue()), nu_(grid.nu()), nv_(grid.nv()) {
        const int nslices = nu_ + nv_ + 1;
        res_.grid = grid;
        res_.slice_t.resize(nslices);
        for (int k = 0; k < nslices; ++k) res_.slice_t[k] = grid.slice_time(k);
        res_.energy.assign(nslices, 0.0);
        res_.energy_n_interior.assign(nslices, 0.0);
        res_.morawetz_cumulative.assign(nslices, 0.0);
        res_.last_complete_slice = std::min(nu_, nv_);
        res_.cone_u.resize(nu_ + 1);
        for (int i = 0; i <= nu_; ++i) res_.cone_u[i] = grid.u(i);
        for (auto& v : res_.rp) v.assign(nu_ + 1, 0.0);
        res_.cone_sup.assign(nu_ + 1, 0.0);
        for (const double re : opt.extraction_radii) {
            if (!(re > bg.horizon_radius())) throw ConfigError("extraction radius must exceed 2M");
            Extractor ex;
            ex.series.radius = re;
            const double dd = (2.0 * tortoise(bg, re) - (grid.v_min - grid.u_min)) / grid.h;
            ex.d0 = int(std::floor(dd));
            ex.frac = dd - ex.d0;
            if (ex.frac > 1.0 - 1e-12) { ++ex.d0; ex.frac = 0.0; }
            ex.rstar = tortoise(bg, re);
            extractors_.push_back(ex);
        }
        du_.resize(nv_ + 1);
        dv_.resize(nv_ + 1);
    }

    /// Row i with its neighbours; `at` selects the stencil: -1 forward (i = 0),
    /// 0 centred, +1 backward (i = nu). rows = {Psi_a, Psi_b, Psi_c} are three
    /// consecutive rows containing row i.
    void process_row(int i, const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& c, int at) {
        const double h = grid_.h;
        const std::vector<double>& row = at < 0 ? a : (at > 0 ? c : b);
        for (int j = 0; j <= nv_; ++j) {
            if (at < 0) du_[j] = (-3.0 * a[j] + 4.0 * b[j] - c[j]) / (2.0 * h);
            else if (at > 0) du_[j] = (a[j] - 4.0 * b[j] + 3.0 * c[j]) / (2.0 * h);
            else du_[j] = (c[j] - a[j]) / (2.0 * h);
        }
        dv_[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * h);
        for (int j = 1; j < nv_; ++j) dv_[j] = (row[j + 1] - row[j - 1]) / (2.0 * h);
        dv_[nv_] = (row[nv_ - 2] - 4.0 * row[nv_ - 1] + 3.0 * row[nv_]) / (2.0 * h);

        const double wi = (i == 0 || i == nu_) ? 0.5 : 1.0;
        const double cell = 0.5 * h * h;
        std::array<double, 3> rp{0.0, 0.0, 0.0};
        double sup = 0.0;
        for (int j = 0; j <= nv_; ++j) {
            const int idx = j - i + nu_;
            const int k = i + j;
            const double r = cache_.r[idx];
            const double eta = cache_.eta[idx];
            const double psi_big = row[j];
            const double du = du_[j], dv = dv_[j];

            // slice energy, trapezoid along the anti-diagonal
            const int k_lo = std::max(0, k - nv_), k_hi = std::min(nu_, k);
            const double ws = (i == k_lo || i == k_hi) ? 0.5 : 1.0;
            res_.energy[k] += ws * h * (du * du + dv * dv + 0.5 * cache_.V[idx] * psi_big * psi_big);

            const double psi = psi_big / r;
            const double dt_psi = (du + dv) / r;
            const double drs_psi = (dv - du) / r - eta * psi_big / (r * r);
            if (cache_.interior[idx]) {
                const double dr_psi = drs_psi / eta;
                res_.energy_n_interior[k] +=
                    0.5 * h * eta * r * r * (dt_psi * dt_psi + dr_psi * dr_psi + ell_term_ * psi * psi / (r * r));
            }

            double dens = drs_psi * drs_psi + psi * psi / (r * r);
            if (!cache_.photon_band[idx]) dens += (dt_psi * dt_psi + ell_term_ * psi * psi) / r;
            const double wj = (j == 0 || j == nv_) ? 0.5 : 1.0;
            res_.morawetz_cumulative[k] += wi * wj * cell * eta * dens;  // r^2 dr = r^2 eta dr*

            if (cache_.far[idx]) {
                const double wt = (j == nv_) ? 0.5 * h : h;
                const double f = dv * dv * wt;
                rp[0] += f;
                rp[1] += r * f;
                rp[2] += r * r * f;
                sup = std::max(sup, std::sqrt(r) * std::abs(psi));
            }
        }
        for (int p = 0; p < 3; ++p) res_.rp[p][i] = rp[p];
        res_.cone_sup[i] = sup;

        for (auto& ex : extractors_) {
            const int j0 = i + ex.d0;
            if (j0 < 0 || j0 + 1 > nv_) continue;
            const double w = ex.frac;
            const double r = ex.series.radius;
            const double psi = ((1.0 - w) * row[j0] + w * row[j0 + 1]) / r;
            const double dt = ((1.0 - w) * (du_[j0] + dv_[j0]) + w * (du_[j0 + 1] + dv_[j0 + 1])) / r;
            ex.series.t.push_back(grid_.u(i) + ex.rstar);
            ex.series.psi.push_back(psi);
            ex.series.dtpsi.push_back(dt);
            res_.peak_abs_psi = std::max(res_.peak_abs_psi, std::abs(psi));
        }
    }

    EvolutionResult finish() {
        for (std::size_t k = 1; k < res_.morawetz_cumulative.size(); ++k) {
            res_.morawetz_cumulative[k] += res_.morawetz_cumulative[k - 1];
        }
        for (auto& ex : extractors_) res_.extraction.push_back(std::move(ex.series));
        extractors_.clear();
        return std::move(res_);
    }

private:
    struct Extractor {
        ExtractionSeries series;
        int d0 = 0;
        double frac = 0.0;
        double rstar = 0.0;
    };

    GridSpec grid_;
    const DiagonalCache& cache_;
    double ell_term_;
    int nu_, nv_;
    std::vector<double> du_, dv_;
    std::vector<Extractor> extractors_;
    EvolutionResult res_;
};

/// Full lattice for small grids; values[i * (nv+1) + j] = Psi(u_i, v_j).
struct NullGridField {
    GridSpec grid;
    BackgroundParams background;
    ModeSpec mode;
    DiagnosticOptions options;
    std::vector<double> values;

    double operator()(int i, int j) const { return values[std::size_t(i) * (grid.nv() + 1) + j]; }
};

namespace detail {

/// Runs the scheme, handing each completed row to `sink(i, row)`.
template <class Sink>
void march(const GridSpec& grid, const InitialData& data, const std::vector<double>& V_by_diag, Sink&& sink) {
    const int nu = grid.nu();
    std::vector<double> cur = data.row, next(cur.size());
    sink(0, cur);
    for (int i = 0; i < nu; ++i) {
        next[0] = data.column[i + 1];
        step_diamond(cur, next, i, grid.h, V_by_diag, nu);
        std::swap(cur, next);
        sink(i + 1, cur);
    }
}

} // namespace detail

inline NullGridField evolve_field(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& grid,
                                  const Profile& profile, const DiagnosticOptions& opt = {}) {
    const auto data = init_data(grid, profile);
    const DiagonalCache cache(bg, mode, grid, opt);
    NullGridField field{grid, bg, mode, opt, {}};
    const std::size_t width = std::size_t(grid.nv()) + 1;
    field.values.resize((std::size_t(grid.nu()) + 1) * width);
    detail::march(grid, data, cache.V, [&](int i, const std::vector<double>& row) {
        std::copy(row.begin(), row.end(), field.values.begin() + std::ptrdiff_t(std::size_t(i) * width));
    });
    return field;
}

/// Streaming evolution keeping three rows in memory.
inline EvolutionResult run_evolution(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& grid,
                                     const Profile& profile, const DiagnosticOptions& opt = {}) {
    const auto data = init_data(grid, profile);
    const DiagonalCache cache(bg, mode, grid, opt);
    DiagnosticsAccumulator acc(bg, mode, grid, opt, cache);
    const int nu = grid.nu();
    std::array<std::vector<double>, 3> ring;
    detail::march(grid, data, cache.V, [&](int i, const std::vector<double>& row) {
        ring[std::size_t(i % 3)] = row;
        if (i < 2) return;
        const auto& a = ring[std::size_t((i - 2) % 3)];
        const auto& b = ring[std::size_t((i - 1) % 3)];
        const auto& c = ring[std::size_t(i % 3)];
        if (i == 2) acc.process_row(0, a, b, c, -1);
        acc.process_row(i - 1, a, b, c, 0);
        if (i == nu) acc.process_row(nu, a, b, c, +1);
    });
    return acc.finish();
}

/// All diagnostics of a stored lattice.
inline EvolutionResult diagnostics(const NullGridField& field) {
    const DiagonalCache cache(field.background, field.mode, field.grid, field.options);
    DiagnosticsAccumulator acc(field.background, field.mode, field.grid, field.options, cache);
    const int nu = field.grid.nu();
    const std::size_t width = std::size_t(field.grid.nv()) + 1;
    auto row = [&](int i) {
        const auto first = field.values.begin() + std::ptrdiff_t(std::size_t(i) * width);
        return std::vector<double>(first, first + std::ptrdiff_t(width));
    };
    for (int i = 0; i <= nu; ++i) {
        const int lo = std::clamp(i - 1, 0, nu - 2);
        const int at = i == 0 ? -1 : (i == nu ? +1 : 0);
        acc.process_row(i, row(lo), row(lo + 1), row(lo + 2), at);
    }
    return acc.finish();
}

/// E(t) = (1/2) Int [(d_t Psi)^2 + (d_r* Psi)^2 + V Psi^2] dr* on the slice u + v = 2t.
inline double energy_1p1(const NullGridField& field, double t) {
    const auto res = diagnostics(field);
    if (t < res.slice_t.front() || t > res.slice_t.back()) throw DomainError("energy_1p1: slice outside the domain");
    return res.energy_at(t);
}

/// Cumulative Morawetz bulk integral over lattice points with t' <= t.
inline double morawetz_bulk(const NullGridField& field, double t) {
    const auto res = diagnostics(field);
    if (t < res.slice_t.front()) return 0.0;
    const int k = std::min(int(res.slice_t.size()) - 1,
                           int(std::floor((t - res.slice_t.front()) / (0.5 * field.grid.h) + 1e-9)));
    return res.morawetz_cumulative[std::size_t(k)];
}

/// Int_{r >= R} r^p (d_v Psi)^2 dv on the cone u = u_cone (nearest lattice row).
inline double rp_flux(const NullGridField& field, double u_cone, int p) {
    if (p < 0 || p > 2) throw DomainError("rp_flux: p must be 0, 1 or 2");
    const auto res = diagnostics(field);
    const int i = int(std::lround((u_cone - field.grid.u_min) / field.grid.h));
    if (i < 0 || i > field.grid.nu()) throw DomainError("rp_flux: cone outside the domain");
    return res.rp[std::size_t(p)][std::size_t(i)];
}

/// psi and d_t psi along r = r_fixed.
inline ExtractionSeries extract(const NullGridField& field, double r_fixed) {
    NullGridField copy = field;
    copy.options.extraction_radii = {r_fixed};
    auto res = diagnostics(copy);
    if (res.extraction.front().t.empty()) throw DomainError("extract: curve r = const misses the domain");
    return res.extraction.front();
}

// ---------------------------------------------------------------------------
// Convergence
// ---------------------------------------------------------------------------

/// Psi at the lattice point nearest to (t, r), snapped to the coarsest grid so
/// that every refinement hits the same (u, v). The evolution runs only on the
/// causal rectangle [u_min, u] x [v_min, v].
inline double point_value(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& base,
                          const Profile& profile, double u, double v, bool flat = false) {
    GridSpec g = base;
    g.u_max = u;
    g.v_max = v;
    DiagnosticOptions opt;
    opt.flat_potential = flat;
    const auto data = init_data(g, profile, false);
    const DiagonalCache cache(bg, mode, g, opt);
    double corner = 0.0;
    detail::march(g, data, cache.V, [&](int i, const std::vector<double>& row) {
        if (i == g.nu()) corner = row.back();
    });
    return corner;
}

struct ConvergenceReport {
    double u = 0.0, v = 0.0;
    std::array<double, 3> h{};
    std::array<double, 3> value{};
    double order = 0.0;
    bool exact = false;  // differences at roundoff level: scheme exact for this data
};

/// Three-resolution self-convergence of Psi(t, r): order = log2(|P_h - P_{h/2}| / |P_{h/2} - P_{h/4}|).
inline ConvergenceReport convergence_order(const BackgroundParams& bg, const ModeSpec& mode, const GridSpec& base,
                                           const Profile& profile, double t, double r, bool flat = false) {
    const double rs = tortoise(bg, r);
    ConvergenceReport rep;
    const double h = base.h;
    rep.u = base.u_min + h * std::round((t - rs - base.u_min) / h);
    rep.v = base.v_min + h * std::round((t + rs - base.v_min) / h);
    if (rep.u <= base.u_min + 2 * h || rep.v <= base.v_min + 2 * h) {
        throw DomainError("convergence_order: point outside the domain");
    }
    for (int level = 0; level < 3; ++level) {
        GridSpec g = base;
        g.h = h / double(1 << level);
        rep.h[std::size_t(level)] = g.h;
        rep.value[std::size_t(level)] = point_value(bg, mode, g, profile, rep.u, rep.v, flat);
    }
    const double d1 = std::abs(rep.value[0] - rep.value[1]);
    const double d2 = std::abs(rep.value[1] - rep.value[2]);
    // roundoff accumulates at the level of the data, not of the sampled value
    const double scale = std::max({std::abs(profile.amplitude), std::abs(rep.value[0]), 1e-300});
    if (d1 <= 1e-10 * scale && d2 <= 1e-10 * scale) {
        rep.exact = true;
        rep.order = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.order = std::log2(d1 / d2);
    return rep;
}

// ---------------------------------------------------------------------------
// Decay fits
// ---------------------------------------------------------------------------

struct DecayFit {
    std::string observable;
    double t0 = 0.0, t1 = 0.0;
    std::size_t samples = 0;
    double exponent = 0.0;
    double stderr_exponent = 0.0;
    double min_over_peak = 0.0;
    int sign_changes = 0;
    std::vector<double> local_t;
    std::vector<double> local_index;  // -d ln|value| / d ln t
};

struct FitGuards {
    double floor_fraction = 1e-12;  // abort if |value| < floor_fraction * peak inside the window
    int max_sign_changes = 0;       // more means the window still rings
    double peak = -1.0;             // peak |value| of the whole series; computed if negative
    std::size_t local_stride = 0;   // spacing of local-index samples; 0 picks ~100 samples
};

/// Least-squares slope of ln|value| against ln t over [t0, t1].
/// Throws CheckFailure on ringing or roundoff-floor contamination.
inline DecayFit fit_decay(const std::string& name, const std::vector<double>& t, const std::vector<double>& value,
                          double t0, double t1, const FitGuards& guards = {}) {
    if (t.size() != value.size()) throw DomainError("fit_decay: t and value lengths differ");
    if (!(t1 > t0) || !(t0 > 0.0)) throw DomainError("fit_decay: need 0 < t0 < t1");
    if (t.empty() || t0 < t.front() || t1 > t.back()) throw DomainError("fit_decay: window outside sample range");
    DecayFit fit;
    fit.observable = name;
    fit.t0 = t0;
    fit.t1 = t1;
    double peak = guards.peak;
    if (peak < 0.0) {
        peak = 0.0;
        for (const double x : value) peak = std::max(peak, std::abs(x));
    }
    std::vector<double> lx, ly;
    double min_abs = std::numeric_limits<double>::infinity();
    double prev_sign = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t0 || t[k] > t1) continue;
        const double s = value[k] > 0.0 ? 1.0 : (value[k] < 0.0 ? -1.0 : 0.0);
        if (prev_sign != 0.0 && s != 0.0 && s != prev_sign) ++fit.sign_changes;
        if (s != 0.0) prev_sign = s;
        min_abs = std::min(min_abs, std::abs(value[k]));
        lx.push_back(std::log(t[k]));
        ly.push_back(std::log(std::abs(value[k])));
    }
    fit.samples = lx.size();
    fit.min_over_peak = peak > 0.0 ? min_abs / peak : 0.0;
    if (fit.samples < 3) throw DomainError("fit_decay: fewer than 3 samples in the window");
    if (fit.sign_changes > guards.max_sign_changes) {
        throw CheckFailure("fit_decay(" + name + "): window contaminated by ringing (" +
                           std::to_string(fit.sign_changes) + " sign changes)");
    }
    if (!(min_abs >= guards.floor_fraction * peak) || min_abs == 0.0) {
        throw CheckFailure("fit_decay(" + name + "): values fall below the roundoff floor in the window");
    }
    const double n = double(fit.samples);
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) { mx += lx[k]; my += ly[k]; }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    fit.exponent = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        const double res = ly[k] - (my + fit.exponent * (lx[k] - mx));
        ssr += res * res;
    }
    fit.stderr_exponent = fit.samples > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;

    const std::size_t stride = guards.local_stride ? guards.local_stride : std::max<std::size_t>(1, lx.size() / 100);
    for (std::size_t k = stride; k + stride < lx.size(); k += stride) {
        fit.local_t.push_back(std::exp(lx[k]));
        fit.local_index.push_back(-(ly[k + stride] - ly[k - stride]) / (lx[k + stride] - lx[k - stride]));
    }
    return fit;
}

/// Slope of ln y against ln x by least squares (used for flux decay across cones).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) { mx += std::log(x[k]); my += std::log(y[k]); }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = std::log(x[k]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[k]) - my);
    }
    return sxy / sxx;
}

} // namespace rwz::evolve
