#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vvtri/decomposition.hpp"
#include "vvtri/kernels.hpp"
#include "vvtri/model.hpp"
#include "vvtri/riemann.hpp"
#include "vvtri/solver.hpp"
#include "vvtri/verify.hpp"

namespace vv::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitAcceptance = 4;

std::string version();

// Data generators of the [data] section.
struct DataSpec {
    std::string kind = "constant";  // constant | pulse | step | table | layer
    State state;                    // constant
    State dir{1.0, 0.0};            // pulse, around u_star
    double amp = 0.0, x0 = 0.0, width = 1.0;
    State left, right;              // step
    std::vector<std::pair<double, State>> u0_table;  // table: x,u1,u2 rows
    State U0, UL;                   // layer: stationary double profile
    // Optional boundary overrides, t,u1,u2 rows (a single row is a constant).
    std::vector<std::pair<double, State>> ub0_table, ubL_table;
};

struct Numerics {
    double L = 8.0;
    double T = 1.0;
    double eps = 0.0;  // 0 solves u_t + A u_x = u_xx on (0, L); otherwise eps u_xx
    FdOptions fd;
    double delta_hat = 1.0 / 3.0;
    double min_ratio = 10.0;
    // stability suite
    double perturbation = 0.004;
    // convergence suite
    std::vector<double> eps_ladder{0.08, 0.04, 0.02, 0.01};
    std::vector<double> eps_ladder_b{0.06, 0.03, 0.015, 0.0075};
    double t_eval = 0.02;
    // grid spacing of the rescaled eps runs (convergence and viscosity suites)
    double rescaled_dx = 0.25;
    // viscosity suite
    double limit_eps = 1e-3;
    int limit_nt = 121;
    int limit_nx = 4001;
    std::vector<double> h_ladder{0.004, 0.002, 0.001, 0.0005};
    std::vector<TestPoint> points;
    double beta = 0.0, rho = 0.0;
};

struct ExperimentConfig {
    std::string source;  // file name, for messages
    std::string system_name;
    TriangularSystem system;
    DataSpec data;
    Numerics numerics;
    std::vector<std::string> stages{"solve"};
    std::string out_dir = ".";
};

// INI-shaped text: [system], [data], [numerics], [pipeline], [output]. States
// are "u1, u2"; tables are "x, u1, u2; x, u1, u2; ...". Unknown sections or
// keys, malformed values and a separation speed c that the system does not
// certify raise ConfigError naming the line and key.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

DataTriple build_data(const ExperimentConfig& cfg);

// Parses "a, b"; ConfigError otherwise.
State parse_state(const std::string& text);
std::vector<double> parse_list(const std::string& text);

// ------------------------------------------------------------------ writers

void write_solution_csv(std::ostream& os, const GridField& f);
void write_decomposition_csv(std::ostream& os, const DecompFields& d);
void write_profile_csv(std::ostream& os, const DoubleProfile& p);
void write_fan_csv(std::ostream& os, const WaveFan& fan, double xi_min, double xi_max, int samples);
std::string fan_json(const WaveFan& fan, int indent = 2);

// Rows t,x,y,kernel,value,tail_bound for delta, delta_tilde (on the x-grid
// against every y), j0 (y = 0) and jL (y = L).
void write_kernel_csv(std::ostream& os, const KernelSpec& spec, const std::vector<double>& times, int nx,
                      const std::vector<double>& ys);

// ----------------------------------------------------------------- pipeline

struct RunContext {
    std::string out_dir = ".";
    int threads = 1;
    unsigned long long seed = 0;
    std::ostream* log = nullptr;  // one summary line per stage
};

// Stages: solve, decompose, stability, convergence, functionals, viscosity.
// Writes CSV/JSON under ctx.out_dir and returns an exit code; vv::Error
// escapes with the stage name prefixed.
int run_stages(const ExperimentConfig& cfg, const std::vector<std::string>& stages, const RunContext& ctx);

// Maps an exception to an exit code: ConfigError and InvalidArgument to 2,
// any other library error to 3.
int exit_code_for(const Error& e);

// The command-line tool: parses argv, runs the subcommand, prints summaries to
// `out` and diagnostics to `err`, and returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vv::cli
