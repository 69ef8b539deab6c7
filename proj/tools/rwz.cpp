// rwz: constants | evolve | convergence | sweep
//
// Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 numerical abort.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "rwz/cli.hpp"

namespace {

using rwz::cli::RunConfig;

struct Flags {
    std::string config_file;
    double mass = 1.0;
    int ell = 2;
    std::string kind = "rw";
    double h = 0.05;
    double u_min = 0, u_max = 0, v_min = 0, v_max = 0;
    double center = 0, width = 0, amplitude = 0;
    std::string profile;
    std::vector<double> extract_r;
    std::string fit_window;
    std::string out;
    int levels = 3;
    std::vector<int> ells;
    std::vector<std::string> kinds;
    int jobs = 2;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_file, "flat JSON run configuration");
    cmd->add_option("--mass", f.mass, "black hole mass M");
    cmd->add_option("--ell", f.ell, "spherical harmonic index (>= 2)");
    cmd->add_option("--kind", f.kind, "rw or zerilli");
    cmd->add_option("--out", f.out, "output directory");
}

void add_grid(CLI::App* cmd, Flags& f) {
    cmd->add_option("--h", f.h, "null grid spacing in units of M");
    cmd->add_option("--u-min", f.u_min, "retarded time range of the lattice");
    cmd->add_option("--u-max", f.u_max, "");
    cmd->add_option("--v-min", f.v_min, "advanced time range of the lattice");
    cmd->add_option("--v-max", f.v_max, "");
    cmd->add_option("--center", f.center, "pulse centre r* at t = 0");
    cmd->add_option("--width", f.width, "Gaussian width");
    cmd->add_option("--amplitude", f.amplitude, "peak value of Psi = r psi");
    cmd->add_option("--profile", f.profile, "ingoing or time_symmetric");
    cmd->add_option("--extract-r", f.extract_r, "extraction radii in units of M");
    cmd->add_option("--fit-window", f.fit_window, "t0:t1");
}

/// Defaults, then the config file, then flags given on the command line.
RunConfig resolve(const CLI::App* cmd, const Flags& f) {
    RunConfig c = f.config_file.empty() ? RunConfig{} : rwz::cli::load_config_file(f.config_file);
    auto given = [&](const char* name) {
        const auto* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--mass")) c.mass = f.mass;
    if (given("--ell")) c.ell = f.ell;
    if (given("--kind")) c.kind = f.kind;
    if (given("--out")) c.out = f.out;
    if (given("--h")) c.h = f.h;
    if (given("--u-min")) c.u_min = f.u_min;
    if (given("--u-max")) c.u_max = f.u_max;
    if (given("--v-min")) c.v_min = f.v_min;
    if (given("--v-max")) c.v_max = f.v_max;
    if (given("--center")) c.center = f.center;
    if (given("--width")) c.width = f.width;
    if (given("--amplitude")) c.amplitude = f.amplitude;
    if (given("--profile")) c.profile = f.profile;
    if (given("--extract-r")) c.extract_r = f.extract_r;
    if (given("--levels")) c.levels = f.levels;
    if (given("--ells")) c.sweep_ells = f.ells;
    if (given("--kinds")) c.sweep_kinds = f.kinds;
    if (given("--jobs")) c.jobs = f.jobs;
    if (given("--fit-window")) {
        const auto colon = f.fit_window.find(':');
        if (colon == std::string::npos) throw rwz::ConfigError("--fit-window expects t0:t1");
        try {
            c.fit_t0 = std::stod(f.fit_window.substr(0, colon));
            c.fit_t1 = std::stod(f.fit_window.substr(colon + 1));
        } catch (const std::exception&) {
            throw rwz::ConfigError("--fit-window expects t0:t1");
        }
    }
    rwz::cli::validate(c);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regge-Wheeler / Zerilli Morawetz constants and decay diagnostics"};
    app.require_subcommand(1);
    // -h is taken by the grid spacing; subcommands inherit this help flag
    app.set_help_flag("--help", "print this help message and exit");
    Flags f;

    auto* constants = app.add_subcommand("constants", "matching constants, Lambda, omega, lower-bound and Hardy checks");
    add_common(constants, f);

    auto* evolve = app.add_subcommand("evolve", "double-null evolution with decay diagnostics");
    add_common(evolve, f);
    add_grid(evolve, f);
    bool with_convergence = false;
    evolve->add_flag("--convergence", with_convergence, "also run the three-resolution convergence test");

    auto* convergence = app.add_subcommand("convergence", "three-resolution self-convergence of Psi(t, r)");
    add_common(convergence, f);
    add_grid(convergence, f);
    convergence->add_option("--levels", f.levels, "number of resolutions (must be 3)");
    bool flat = false;
    convergence->add_flag("--flat", flat, "zero potential (exact propagation)");

    auto* sweep = app.add_subcommand("sweep", "independent evolutions over ell and kind");
    add_common(sweep, f);
    add_grid(sweep, f);
    sweep->add_option("--ells", f.ells, "harmonic indices to sweep");
    sweep->add_option("--kinds", f.kinds, "rw and/or zerilli");
    sweep->add_option("--jobs", f.jobs, "concurrent evolutions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : rwz::cli::kUsageError;
    }

    try {
        rwz::cli::CommandResult res;
        if (constants->parsed()) {
            auto c = resolve(constants, f);
            res = rwz::cli::cmd_constants(c);
            if (constants->count("--out")) {
                rwz::cli::detail::write_json(std::filesystem::path(c.out) / "constants.json", res.report);
            }
        } else if (evolve->parsed()) {
            auto c = resolve(evolve, f);
            c.convergence = c.convergence || with_convergence;
            res = rwz::cli::cmd_evolve(c);
        } else if (convergence->parsed()) {
            auto c = resolve(convergence, f);
            c.flat = c.flat || flat;
            res = rwz::cli::cmd_convergence(c);
        } else {
            res = rwz::cli::cmd_sweep(resolve(sweep, f));
        }
        std::cout << res.report.dump(2) << "\n";
        if (res.exit_code != rwz::cli::kPass) std::cerr << "check failed: " << res.first_failure << "\n";
        return res.exit_code;
    } catch (const rwz::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return rwz::cli::kUsageError;
    } catch (const rwz::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return rwz::cli::kUsageError;
    } catch (const rwz::CheckFailure& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return rwz::cli::kCheckFailure;
    } catch (const rwz::NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return rwz::cli::kNumericalAbort;
    } catch (const rwz::ConvergenceError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return rwz::cli::kNumericalAbort;
    }
}
