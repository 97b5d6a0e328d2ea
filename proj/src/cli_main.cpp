#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "vvtri/cli.hpp"

namespace vv::cli {

namespace {

void write_to(const std::string& dir, const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    std::ofstream os(std::filesystem::path(dir) / name, std::ios::binary);
    if (!os) fail(ErrorKind::ConfigError, "cannot write " + name + " in " + dir);
    os << body;
}

TriangularSystem named_system(const std::string& name) {
    auto sys = builtin_system(name);
    if (!certify_hyperbolic(sys, 21).ok) fail(ErrorKind::ConfigError, "system " + name + " fails its separation check");
    return sys;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Viscous approximations of triangular hyperbolic systems on an interval", "vvtri"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    std::optional<std::string> out_dir;
    RunContext ctx;
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", ctx.seed, "Seed of the random perturbations");

    std::string config;
    auto with_config = [&](CLI::App* sub) { sub->add_option("config", config, "Experiment config")->required(); };

    auto* solve = app.add_subcommand("solve", "Viscous solve of a configured experiment");
    with_config(solve);
    auto* decompose = app.add_subcommand("decompose", "Solve and decompose the gradient");
    with_config(decompose);
    auto* run = app.add_subcommand("run", "Run the pipeline declared in a config");
    with_config(run);
    auto* verify = app.add_subcommand("verify", "Verification suites");
    with_config(verify);
    bool stability = false, convergence = false, functionals = false, viscosity = false;
    verify->add_flag("--stability", stability);
    verify->add_flag("--convergence", convergence);
    verify->add_flag("--functionals", functionals);
    verify->add_flag("--viscosity", viscosity);

    std::string system = "burgers-triangular";
    std::string left = "0,0", right = "0,0";
    double xi_min = -6.0, xi_max = 6.0, L = 8.0;
    int samples = 241, n = 2001;

    auto* profile = app.add_subcommand("profile", "Stationary double boundary profile");
    profile->add_option("--system", system);
    profile->add_option("--U0", left, "State at x = 0")->required();
    profile->add_option("--UL", right, "State at x = L")->required();
    profile->add_option("--L", L)->check(CLI::PositiveNumber);
    profile->add_option("--n", n, "Grid points")->check(CLI::Range(3, 1 << 22));

    auto* riemann = app.add_subcommand("riemann", "Riemann fan");
    riemann->add_option("--system", system);
    riemann->add_option("--left", left)->required();
    riemann->add_option("--right", right)->required();
    riemann->add_option("--xi-min", xi_min);
    riemann->add_option("--xi-max", xi_max);
    riemann->add_option("--samples", samples)->check(CLI::Range(2, 1 << 22));

    auto* boundary = app.add_subcommand("boundary-riemann", "Boundary Riemann fan");
    std::string side = "left";
    std::optional<double> bxi_min, bxi_max;
    boundary->add_option("--system", system);
    boundary->add_option("--side", side)->check(CLI::IsMember({"left", "right"}));
    boundary->add_option("--u0", left, "Initial state")->required();
    boundary->add_option("--ub", right, "Boundary state")->required();
    boundary->add_option("--xi-min", bxi_min);
    boundary->add_option("--xi-max", bxi_max);
    boundary->add_option("--samples", samples)->check(CLI::Range(2, 1 << 22));

    auto* kernel = app.add_subcommand("kernel-dump", "Interval kernels on a grid");
    KernelSpec spec;
    std::string times = "0.01,0.1,1", ys = "0.25,0.5,0.75";
    int nx = 101;
    kernel->add_option("--lambda", spec.lambda);
    kernel->add_option("--L", spec.L)->check(CLI::PositiveNumber);
    kernel->add_option("--m-max", spec.m_max)->check(CLI::NonNegativeNumber);
    kernel->add_option("--tail-tol", spec.tail_tol)->check(CLI::PositiveNumber);
    kernel->add_option("--times", times, "Comma-separated times");
    kernel->add_option("--y", ys, "Comma-separated source points, as fractions of L");
    kernel->add_option("--nx", nx)->check(CLI::Range(2, 1 << 20));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        ctx.log = &out;
        auto configured = [&](std::vector<std::string> stages) {
            const auto cfg = load_config(config);
            ctx.out_dir = out_dir.value_or(cfg.out_dir);
            if (stages.empty()) stages = cfg.stages;
            for (const auto& s : stages)
                if ((s == "decompose" || s == "functionals") && cfg.numerics.eps > 0)
                    fail(ErrorKind::ConfigError, config + ": [numerics] eps: the " + s + " stage needs eps = 0");
            return run_stages(cfg, stages, ctx);
        };
        ctx.out_dir = out_dir.value_or(".");

        if (*solve) return configured({"solve"});
        if (*decompose) return configured({"solve", "decompose"});
        if (*run) return configured({});
        if (*verify) {
            std::vector<std::string> stages;
            if (stability) stages.push_back("stability");
            if (convergence) stages.push_back("convergence");
            if (functionals) stages.push_back("functionals");
            if (viscosity) stages.push_back("viscosity");
            if (stages.empty()) fail(ErrorKind::ConfigError, "verify needs at least one of --stability --convergence --functionals --viscosity");
            return configured(stages);
        }
        if (*profile) {
            const auto sys = named_system(system);
            DoubleProfileOptions o;
            o.n = n;
            const auto p = double_profile(sys, parse_state(left), parse_state(right), L, o);
            std::ostringstream csv;
            write_profile_csv(csv, p);
            write_to(ctx.out_dir, "profile.csv", csv.str());
            out << "profile: n=" << p.x.size() << " mismatch=" << p.mismatch << " iterations=" << p.iterations << "\n";
            return kExitOk;
        }
        if (*riemann) {
            const auto fan = solve_riemann(named_system(system), parse_state(left), parse_state(right));
            std::ostringstream csv;
            write_fan_csv(csv, fan, xi_min, xi_max, samples);
            write_to(ctx.out_dir, "fan.csv", csv.str());
            write_to(ctx.out_dir, "fan.json", fan_json(fan));
            out << "riemann: s1=" << fan.s1 << " s2=" << fan.s2 << " segments=" << fan.segments.size() << "\n";
            return kExitOk;
        }
        if (*boundary) {
            const auto s = side == "left" ? BoundarySide::Left : BoundarySide::Right;
            const auto fan = solve_boundary_riemann(named_system(system), parse_state(left), parse_state(right), s);
            const double lo = bxi_min.value_or(s == BoundarySide::Left ? 0.0 : -6.0);
            const double hi = bxi_max.value_or(s == BoundarySide::Left ? 6.0 : 0.0);
            std::ostringstream csv;
            write_fan_csv(csv, fan, lo, hi, samples);
            write_to(ctx.out_dir, "fan.csv", csv.str());
            write_to(ctx.out_dir, "fan.json", fan_json(fan));
            out << "boundary-riemann: s1=" << fan.s1 << " s2=" << fan.s2 << " trace=(" << fan.trace->u1 << ", "
                << fan.trace->u2 << ")\n";
            return kExitOk;
        }
        if (*kernel) {
            auto y = parse_list(ys);
            for (double& v : y) v *= spec.L;
            std::ostringstream csv;
            write_kernel_csv(csv, spec, parse_list(times), nx, y);
            write_to(ctx.out_dir, "kernels.csv", csv.str());
            out << "kernel-dump: lambda=" << spec.lambda << " L=" << spec.L << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace vv::cli
