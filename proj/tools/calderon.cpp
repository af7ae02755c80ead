#include "calderon/corner.hpp"
#include "calderon/error.hpp"
#include "calderon/experiments.hpp"
#include "calderon/smallness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

using namespace calderon;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kCommands{"solve", "exponent", "probe", "sweep-stability", "verify-smallness",
                                      "recover-contrast"};

void usage(std::ostream& os)
{
    os << "usage: calderon <command> [options]\n"
          "commands:\n"
          "  solve             forward solves for D and D'; writes mesh and field files\n"
          "  exponent          leading corner exponent for opening a and contrast k\n"
          "  probe             probe identity and tau balance over the tau schedule\n"
          "  sweep-stability   boundary misfit against Hausdorff distance\n"
          "  verify-smallness  three-sphere and chain checks on random harmonic samples\n"
          "  recover-contrast  layer contrasts from boundary data\n"
          "run 'calderon <command> --help' for options\n";
}

Scenario load_scenario(const std::string& path)
{
    Scenario s = path.empty() ? Scenario::bundled() : Scenario::from_config(Config::load(path));
    s.validate();
    return s;
}

std::ofstream open_out(const fs::path& p)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw Error(ErrorKind::Config, "cannot write " + p.string());
    return os;
}

struct Common {
    std::string config;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("-c,--config", c.config, "scenario file; the bundled scenario when omitted");
    cmd->add_option("-o,--out-dir", c.out_dir, "output directory");
}

int run_solve(const Common& c)
{
    const auto s = load_scenario(c.config);
    const fs::path dir(c.out_dir);
    auto one = [&](const NestedGeometry& g, const std::string& tag) {
        const auto u = scenario_solve(s, g, s.target_h, s.g);
        auto m = open_out(dir / (tag + "_mesh.txt"));
        write_mesh(m, u.mesh());
        auto f = open_out(dir / (tag + "_field.txt"));
        write_field(f, u);
        const auto& r = u.report();
        std::printf("%s: %zu nodes, %zu triangles, %zu iterations, residual %.3e, energy %.17g\n", tag.c_str(),
                    u.mesh().num_nodes(), u.mesh().num_triangles(), r.iterations, r.relative_residual, r.energy);
        return u;
    };
    const auto u = one(s.geometry, "u");
    if (!s.comparison.empty()) {
        const auto up = one(s.comparison, "u_prime");
        std::printf("boundary misfit on gamma0 %.17g\n", boundary_misfit(u, up, s));
    }
    return 0;
}

int run_exponent(const std::vector<double>& as, const std::vector<double>& ks, const std::string& out)
{
    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    os << "a,k,eta,Phi_in,Phi_out,c_out\n";
    for (double a : as) {
        for (double k : ks) {
            const auto se = solve_exponent(a, k);
            os << format_number(a) << ',' << format_number(k) << ',' << format_number(se.eta) << ','
               << format_number(se.phi_in) << ',' << format_number(se.phi_out) << ',' << format_number(se.c_out)
               << '\n';
        }
    }
    return 0;
}

int run_probe(const Common& c)
{
    const auto s = load_scenario(c.config);
    const auto b = run_tau_balance(s);
    const fs::path dir(c.out_dir);
    auto p = open_out(dir / "probe.csv");
    write_probe_csv(p, b);
    auto t = open_out(dir / "tau_balance.csv");
    write_tau_balance_csv(t, b);
    std::printf("corner (%.6g, %.6g) eta %.6f K %.6g fit residual %.3e\n", b.corner.x, b.corner.y, b.se.eta, b.fit.K,
                b.fit.residual);
    std::printf("h %.6g tau0 %.6g eps %.6g tau_e %.6g (%s tau0)\n", b.h, b.tau0, b.epsilon, b.tau_e,
                b.tau_e_above_tau0 ? "above" : "below");
    std::size_t admissible = 0;
    for (const auto& r : b.rows) admissible += r.admissible;
    std::printf("|lhs| slope %.6f against -eta %.6f; %zu of %zu tau rows admissible\n", b.lhs_slope, -b.se.eta,
                admissible, b.rows.size());
    return 0;
}

int run_sweep(const Common& c)
{
    const auto s = load_scenario(c.config);
    const auto r = run_stability_sweep(s);
    const fs::path dir(c.out_dir);
    auto csv = open_out(dir / (s.name + "_sweep.csv"));
    write_sweep_csv(csv, r);
    auto rep = open_out(dir / (s.name + "_sweep_report.txt"));
    write_sweep_report(rep, r);
    if (s.svg) {
        auto svg = open_out(dir / (s.name + "_sweep.svg"));
        write_sweep_svg(svg, r);
    }
    write_sweep_report(std::cout, r);
    return 0;
}

int run_smallness(int samples, std::uint64_t seed, const std::string& out)
{
    std::ofstream file;
    if (!out.empty()) file = open_out(out);
    std::ostream& os = out.empty() ? std::cout : file;
    os << "sample_id,r,M1,M2,M4,alpha_star,bound_ok\n";
    int bad = 0;
    for (int i = 0; i < samples; ++i) {
        const auto row = run_chain_sample(seed + static_cast<std::uint64_t>(i));
        const bool ok = row.sphere_holds && row.chain.holds;
        bad += !ok;
        os << i << ',' << format_number(row.r) << ',' << format_number(row.sphere.M1) << ','
           << format_number(row.sphere.M2) << ',' << format_number(row.sphere.M4) << ','
           << format_number(row.sphere.alpha_star) << ',' << int(ok) << '\n';
    }
    std::fprintf(stderr, "%d of %d samples violate a bound\n", bad, samples);
    return bad == 0 ? 0 : 1;
}

int run_recover(const Common& c, double scale)
{
    const auto s = load_scenario(c.config);
    RecoveryOptions o;
    o.scale = scale;
    const auto r = recover_contrast(s, o);
    auto csv = open_out(fs::path(c.out_dir) / (s.name + "_recovery.csv"));
    write_recovery_csv(csv, r);
    write_recovery_csv(std::cout, r);
    std::printf("sweeps %d, %s\n", r.sweeps, r.converged ? "converged" : "not converged");
    for (const auto& l : r.layers)
        if (l.flagged)
            std::fprintf(stderr, "layer %zu: minimizer on the band edge above the floor; truth may lie outside the band\n",
                         l.layer + 1);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        usage(std::cerr);
        return 2;
    }
    const std::string first = argv[1];
    if (first == "-h" || first == "--help") {
        usage(std::cout);
        return 0;
    }
    if (!kCommands.count(first)) {
        std::cerr << "unknown command '" << first << "'\n";
        usage(std::cerr);
        return 2;
    }

    CLI::App app{"Corner probes and stability experiments for polygonal inclusions", "calderon"};
    app.require_subcommand(1);

    Common solve_c, probe_c, sweep_c, recover_c;
    auto* solve = app.add_subcommand("solve", "forward solves for D and D'");
    add_common(solve, solve_c);

    std::vector<double> as{M_PI / 2.0}, ks{2.0};
    std::string exp_out;
    auto* exponent = app.add_subcommand("exponent", "leading corner exponent");
    exponent->add_option("-a,--opening", as, "opening angles in radians")->expected(1, -1);
    exponent->add_option("-k,--contrast", ks, "contrasts")->expected(1, -1);
    exponent->add_option("-o,--out", exp_out, "CSV file; stdout when omitted");

    auto* probe = app.add_subcommand("probe", "probe identity and tau balance");
    add_common(probe, probe_c);

    auto* sweep = app.add_subcommand("sweep-stability", "misfit against Hausdorff distance");
    add_common(sweep, sweep_c);

    int samples = 50;
    std::uint64_t seed = 1;
    std::string small_out;
    auto* small = app.add_subcommand("verify-smallness", "three-sphere and chain checks");
    small->add_option("-n,--samples", samples, "number of random samples")->check(CLI::PositiveNumber);
    small->add_option("-s,--seed", seed, "first sample seed");
    small->add_option("-o,--out", small_out, "CSV file; stdout when omitted");

    double scale = 1.0;
    auto* recover = app.add_subcommand("recover-contrast", "layer contrasts from boundary data");
    add_common(recover, recover_c);
    recover->add_option("--scale", scale, "multiplier on the Neumann data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return run_solve(solve_c);
        if (exponent->parsed()) return run_exponent(as, ks, exp_out);
        if (probe->parsed()) return run_probe(probe_c);
        if (sweep->parsed()) return run_sweep(sweep_c);
        if (small->parsed()) return run_smallness(samples, seed, small_out);
        if (recover->parsed()) return run_recover(recover_c, scale);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (e.kind() == ErrorKind::Config) usage(std::cerr);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
