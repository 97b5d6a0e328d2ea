#include "vvtri/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

namespace vv::cli {

using nlohmann::json;
namespace pt = boost::property_tree;

std::string version() { return "0.1.0"; }

namespace {

std::string num(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

json state_json(const State& s) { return json::array({s.u1, s.u2}); }

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::ConfigError, what); }

double parse_number(std::string text) {
    boost::algorithm::trim(text);
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v))
        config_error("'" + text + "' is not a number");
    return v;
}

std::vector<std::string> split(const std::string& text, const char* sep) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(sep));
    for (auto& p : parts) boost::algorithm::trim(p);
    return parts;
}

std::vector<std::pair<double, State>> parse_table(const std::string& text) {
    std::vector<std::pair<double, State>> rows;
    for (const auto& row : split(text, ";")) {
        if (row.empty()) continue;
        const auto v = parse_list(row);
        if (v.size() != 3) config_error("table row '" + row + "' needs three numbers");
        rows.emplace_back(v[0], State{v[1], v[2]});
    }
    if (rows.empty()) config_error("empty table");
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (!(rows[k].first > rows[k - 1].first)) config_error("table abscissae must increase");
    return rows;
}

std::vector<TestPoint> parse_points(const std::string& text) {
    std::vector<TestPoint> pts;
    for (const auto& row : split(text, ";")) {
        if (row.empty()) continue;
        const auto v = parse_list(row);
        if (v.size() != 2) config_error("point '" + row + "' needs tau, xi");
        pts.push_back({v[0], v[1]});
    }
    return pts;
}

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"system", {"name", "lambda1", "lambda2", "g", "u_star", "delta_box", "c"}},
        {"data", {"kind", "state", "dir", "amp", "x0", "width", "left", "right", "u0", "U0", "UL", "ub0", "ubL"}},
        {"numerics",
         {"L", "T", "eps", "nx", "dx_target", "nt", "store_every", "theta", "upwind_order", "delta_hat", "min_ratio",
          "perturbation", "eps_ladder", "eps_ladder_b", "t_eval", "rescaled_dx", "limit_eps", "limit_nt", "limit_nx",
          "h_ladder", "points", "beta", "rho"}},
        {"pipeline", {"stages"}},
        {"output", {"dir"}},
    };
    return s;
}

const std::set<std::string>& known_stages() {
    static const std::set<std::string> s{"solve", "decompose", "stability", "convergence", "functionals", "viscosity"};
    return s;
}

// Keys of [data] that belong to each generator, besides kind, ub0 and ubL.
const std::map<std::string, std::set<std::string>>& data_keys() {
    static const std::map<std::string, std::set<std::string>> s{
        {"constant", {"state"}},
        {"pulse", {"dir", "amp", "x0", "width"}},
        {"step", {"left", "right", "x0"}},
        {"table", {"u0"}},
        {"layer", {"U0", "UL"}},
    };
    return s;
}

class Reader {
public:
    Reader(std::string text, std::string source) : source_(std::move(source)) {
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);) lines_.push_back(line);
        std::istringstream again(text);
        try {
            pt::read_ini(again, tree_);
        } catch (const pt::ini_parser_error& e) {
            config_error(source_ + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        for (const auto& [section, body] : tree_) {
            const auto it = schema().find(section);
            if (body.empty()) fail_at(section, "", "top-level key outside a section");
            if (it == schema().end()) fail_at(section, "", "unknown section [" + section + "]");
            for (const auto& [key, value] : body) {
                (void)value;
                if (!it->second.count(key)) fail_at(section, key, "unknown key");
            }
        }
    }

    bool has(const std::string& section, const std::string& key) const {
        return tree_.get_child_optional(pt::ptree::path_type(section + "\x1f" + key, '\x1f')).has_value();
    }

    std::string raw(const std::string& section, const std::string& key) const {
        return tree_.get<std::string>(pt::ptree::path_type(section + "\x1f" + key, '\x1f'));
    }

    template <class F>
    auto get(const std::string& section, const std::string& key, F&& parse) const {
        try {
            return parse(raw(section, key));
        } catch (const Error& e) {
            fail_at(section, key, strip(e));
        }
    }

    double number(const std::string& s, const std::string& k, double fallback) const {
        return has(s, k) ? get(s, k, parse_number) : fallback;
    }
    int integer(const std::string& s, const std::string& k, int fallback) const {
        if (!has(s, k)) return fallback;
        const double v = get(s, k, parse_number);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail_at(s, k, "expected an integer");
        return static_cast<int>(v);
    }
    State state(const std::string& s, const std::string& k, State fallback = {}) const {
        return has(s, k) ? get(s, k, parse_state) : fallback;
    }

    [[noreturn]] void fail_at(const std::string& section, const std::string& key, const std::string& msg) const {
        std::ostringstream os;
        os << source_;
        if (const int line = line_of(section, key); line > 0) os << ":" << line;
        os << ": [" << section << "]";
        if (!key.empty()) os << " " << key;
        os << ": " << msg;
        config_error(os.str());
    }

    static std::string strip(const Error& e) {
        const std::string w = e.what();
        const auto pos = w.find(": ");
        return pos == std::string::npos ? w : w.substr(pos + 2);
    }

private:
    int line_of(const std::string& section, const std::string& key) const {
        std::string current;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            std::string l = boost::algorithm::trim_copy(lines_[i]);
            if (l.empty() || l[0] == ';' || l[0] == '#') continue;
            if (l.front() == '[' && l.back() == ']') {
                current = boost::algorithm::trim_copy(l.substr(1, l.size() - 2));
                if (key.empty() && current == section) return static_cast<int>(i + 1);
                continue;
            }
            const auto eq = l.find('=');
            if (current == section && eq != std::string::npos &&
                boost::algorithm::trim_copy(l.substr(0, eq)) == key)
                return static_cast<int>(i + 1);
        }
        return 0;
    }

    std::string source_;
    std::vector<std::string> lines_;
    pt::ptree tree_;
};

TriangularSystem read_system(const Reader& r, std::string& name) {
    if (!r.has("system", "name")) r.fail_at("system", "name", "missing");
    name = r.raw("system", "name");
    TriangularSystem sys;
    if (name == "affine") {
        for (const char* k : {"lambda1", "lambda2", "g", "delta_box", "c"})
            if (!r.has("system", k)) r.fail_at("system", k, "required for an affine system");
        AffineCoefficients k;
        auto coeffs = [&](const char* key, std::size_t n) {
            const auto v = r.get("system", key, parse_list);
            if (v.size() != n) r.fail_at("system", key, "expected " + std::to_string(n) + " coefficients");
            return v;
        };
        const auto l1 = coeffs("lambda1", 2), l2 = coeffs("lambda2", 3), g = coeffs("g", 3);
        k.l1_0 = l1[0], k.l1_1 = l1[1];
        k.l2_0 = l2[0], k.l2_1 = l2[1], k.l2_2 = l2[2];
        k.g_0 = g[0], k.g_1 = g[1], k.g_2 = g[2];
        sys = affine_system("affine", k, r.state("system", "u_star"), r.number("system", "delta_box", 0.0),
                            r.number("system", "c", 0.0));
        if (!(sys.delta_box > 0.0)) r.fail_at("system", "delta_box", "must be positive");
    } else {
        for (const char* k : {"lambda1", "lambda2", "g", "u_star", "delta_box"})
            if (r.has("system", k)) r.fail_at("system", k, "only an affine system takes coefficients");
        try {
            sys = builtin_system(name);
        } catch (const Error& e) {
            r.fail_at("system", "name", Reader::strip(e));
        }
        sys.c = r.number("system", "c", sys.c);
    }
    if (!(sys.c > 0.0)) r.fail_at("system", "c", "separation speed must be positive");
    const auto cert = certify_hyperbolic(sys, 21);
    if (!cert.ok) {
        std::ostringstream os;
        os << "c = " << sys.c << " is not below the measured separation " << cert.c_measured << " at ("
           << cert.worst.u1 << ", " << cert.worst.u2 << ")";
        r.fail_at("system", r.has("system", "c") ? "c" : "name", os.str());
    }
    return sys;
}

DataSpec read_data(const Reader& r, const State& u_star) {
    DataSpec d;
    if (r.has("data", "kind")) d.kind = r.raw("data", "kind");
    const auto it = data_keys().find(d.kind);
    if (it == data_keys().end()) r.fail_at("data", "kind", "unknown generator '" + d.kind + "'");
    for (const auto& [kind, keys] : data_keys())
        for (const auto& k : keys)
            if (!it->second.count(k) && r.has("data", k)) r.fail_at("data", k, "does not apply to kind " + d.kind);
    for (const auto& k : it->second)
        if (!r.has("data", k) && k != "dir" && k != "state") r.fail_at("data", k, "required for kind " + d.kind);
    d.state = r.state("data", "state", u_star);
    d.dir = r.state("data", "dir", d.dir);
    d.amp = r.number("data", "amp", 0.0);
    d.x0 = r.number("data", "x0", 0.0);
    d.width = r.number("data", "width", 1.0);
    if (!(d.width > 0.0)) r.fail_at("data", "width", "must be positive");
    d.left = r.state("data", "left");
    d.right = r.state("data", "right");
    if (r.has("data", "u0")) d.u0_table = r.get("data", "u0", parse_table);
    d.U0 = r.state("data", "U0");
    d.UL = r.state("data", "UL");
    auto boundary = [&](const char* key) -> std::vector<std::pair<double, State>> {
        if (!r.has("data", key)) return {};
        const std::string text = r.raw("data", key);
        if (text.find(';') == std::string::npos && parse_list(text).size() == 2) return {{0.0, parse_state(text)}};
        return r.get("data", key, parse_table);
    };
    d.ub0_table = boundary("ub0");
    d.ubL_table = boundary("ubL");
    return d;
}

Numerics read_numerics(const Reader& r) {
    Numerics n;
    const std::string s = "numerics";
    n.L = r.number(s, "L", n.L);
    n.T = r.number(s, "T", n.T);
    n.eps = r.number(s, "eps", n.eps);
    if (!(n.L > 0)) r.fail_at(s, "L", "must be positive");
    if (!(n.T > 0)) r.fail_at(s, "T", "must be positive");
    if (n.eps < 0) r.fail_at(s, "eps", "must be nonnegative");
    n.fd.nx = r.integer(s, "nx", n.fd.nx);
    n.fd.dx_target = r.number(s, "dx_target", 0.0);
    n.fd.nt = r.integer(s, "nt", 0);
    n.fd.store_every = r.integer(s, "store_every", 1);
    n.fd.theta = r.number(s, "theta", n.fd.theta);
    n.fd.upwind_order = r.integer(s, "upwind_order", n.fd.upwind_order);
    if (n.fd.nx < 5) r.fail_at(s, "nx", "needs at least 5 points");
    if (n.fd.store_every < 1) r.fail_at(s, "store_every", "must be at least 1");
    if (n.fd.upwind_order != 1 && n.fd.upwind_order != 2) r.fail_at(s, "upwind_order", "must be 1 or 2");
    n.delta_hat = r.number(s, "delta_hat", n.delta_hat);
    n.min_ratio = r.number(s, "min_ratio", n.min_ratio);
    n.perturbation = r.number(s, "perturbation", n.perturbation);
    if (!(n.perturbation > 0)) r.fail_at(s, "perturbation", "must be positive");
    auto ladder = [&](const char* key, std::vector<double> fallback, std::size_t min_size) {
        if (!r.has(s, key)) return fallback;
        const auto v = r.get(s, key, parse_list);
        if (v.size() < min_size) r.fail_at(s, key, "needs at least " + std::to_string(min_size) + " values");
        for (std::size_t k = 0; k < v.size(); ++k)
            if (!(v[k] > 0) || (k > 0 && !(v[k] < v[k - 1]))) r.fail_at(s, key, "must be positive and strictly decreasing");
        return v;
    };
    n.eps_ladder = ladder("eps_ladder", n.eps_ladder, 2);
    n.eps_ladder_b = ladder("eps_ladder_b", n.eps_ladder_b, 2);
    n.h_ladder = ladder("h_ladder", n.h_ladder, 4);
    n.t_eval = r.number(s, "t_eval", n.t_eval);
    n.rescaled_dx = r.number(s, "rescaled_dx", n.rescaled_dx);
    if (!(n.rescaled_dx > 0)) r.fail_at(s, "rescaled_dx", "must be positive");
    n.limit_eps = r.number(s, "limit_eps", n.limit_eps);
    n.limit_nt = r.integer(s, "limit_nt", n.limit_nt);
    n.limit_nx = r.integer(s, "limit_nx", n.limit_nx);
    if (n.limit_nt < 2) r.fail_at(s, "limit_nt", "needs at least 2 rows");
    if (n.limit_nx < 2) r.fail_at(s, "limit_nx", "needs at least 2 points");
    if (r.has(s, "points")) n.points = r.get(s, "points", parse_points);
    n.beta = r.number(s, "beta", 0.0);
    n.rho = r.number(s, "rho", 0.0);
    return n;
}

// ------------------------------------------------------------------ stages

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    std::ofstream os(std::filesystem::path(dir) / name, std::ios::binary);
    if (!os) fail(ErrorKind::ConfigError, "cannot write " + name + " in " + dir);
    os << body;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json solve_json(const ExperimentConfig& cfg, const SolveReport& r) {
    json j;
    j["version"] = version();
    j["system"] = cfg.system_name;
    j["L"] = cfg.numerics.L;
    j["T"] = cfg.numerics.T;
    j["eps"] = cfg.numerics.eps;
    j["nx"] = r.field.nx();
    j["stored_rows"] = r.field.nt();
    j["diverged"] = r.diverged;
    j["message"] = r.message;
    j["t"] = r.field.t;
    j["tv_history"] = r.tv_history;
    j["ux_l1"] = r.ux_l1;
    j["uxx_l1"] = r.uxx_l1;
    return j;
}

struct Pipeline {
    const ExperimentConfig& cfg;
    const RunContext& ctx;
    DataTriple data;
    std::optional<SolveReport> solution;
    std::optional<DecompFields> fields;
    bool accepted = true;

    void log(const std::string& line) const {
        if (ctx.log) *ctx.log << line << "\n";
    }

    SolveReport solve_with(const DataTriple& d) const {
        const auto& n = cfg.numerics;
        return n.eps > 0 ? solve_eps(cfg.system, d, n.L, n.eps, n.T, n.fd) : solve_fd(cfg.system, d, n.L, n.T, n.fd);
    }

    void solve() {
        if (solution) return;
        solution = solve_with(data);
        const auto& r = *solution;
        std::ostringstream csv;
        write_solution_csv(csv, r.field);
        write_file(ctx.out_dir, "solution.csv", csv.str());
        write_file(ctx.out_dir, "solution.json", dump(solve_json(cfg, r)));
        const double tv = r.tv_history.empty() ? 0.0 : *std::max_element(r.tv_history.begin(), r.tv_history.end());
        log("solve: nx=" + std::to_string(r.field.nx()) + " rows=" + std::to_string(r.field.nt()) +
            " max_tv=" + num(tv) + (r.diverged ? " DIVERGED" : ""));
        if (r.diverged) fail(ErrorKind::Diverged, r.message);
    }

    void decompose_stage() {
        if (fields) return;
        solve();
        DecomposeOptions o;
        o.delta_hat = cfg.numerics.delta_hat;
        o.min_ratio = cfg.numerics.min_ratio;
        fields = decompose(cfg.system, *solution, o);
        const auto& d = *fields;
        std::ostringstream csv;
        write_decomposition_csv(csv, d);
        write_file(ctx.out_dir, "decomposition.csv", csv.str());
        const auto b = source_budget(d);
        json j;
        j["version"] = version();
        j["delta1"] = d.delta1;
        j["delta_hat"] = d.delta_hat;
        j["c"] = d.c;
        j["v1_consistency"] = d.v1_consistency;
        j["cutoff_fraction"] = d.cutoff_fraction;
        j["integral_s1"] = b.integral_s1;
        j["integral_s2"] = b.integral_s2;
        j["e_integral"] = b.e_integral;
        j["boundary_integrals"] = b.boundary_integrals;
        write_file(ctx.out_dir, "decomposition.json", dump(j));
        log("decompose: delta1=" + num(d.delta1) + " int|s1|=" + num(b.integral_s1));
    }

    void functionals() {
        decompose_stage();
        const auto tr = functionals_trace(*fields);
        bool nonneg = true;
        for (const auto* v : {&tr.Q, &tr.area, &tr.length, &tr.weighted_v1, &tr.weighted_v2})
            for (double x : *v) nonneg = nonneg && x >= 0.0;
        const bool ok = nonneg && tr.near_monotone;
        json j;
        j["t"] = tr.t;
        j["Q"] = tr.Q;
        j["area"] = tr.area;
        j["length"] = tr.length;
        j["weighted_v1"] = tr.weighted_v1;
        j["weighted_v2"] = tr.weighted_v2;
        j["interaction"] = tr.interaction;
        j["q_drop"] = tr.q_drop;
        j["area_increase"] = tr.area_increase;
        j["length_increase"] = tr.length_increase;
        j["budget"] = tr.budget;
        j["near_monotone"] = tr.near_monotone;
        j["ok"] = ok;
        write_file(ctx.out_dir, "verify_functionals.json", dump(j));
        log(std::string("functionals: q_drop=") + num(tr.q_drop) + " interaction=" + num(tr.interaction) +
            (ok ? " ok" : " FAILED"));
        accepted = accepted && ok;
    }

    std::vector<LabelledData> perturbations(double size, std::mt19937_64& rng) const {
        const auto& n = cfg.numerics;
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const double angle = 2.0 * 3.141592653589793 * U(rng);
        const State dir{std::cos(angle), std::sin(angle)};
        const double x0 = n.L * (0.25 + 0.5 * U(rng));
        const auto bump = data::pulse({}, dir, size, x0, n.L / 8);
        DataTriple interior = data, left = data, right = data;
        interior.u0 = [base = data.u0, bump](double x) { return base(x) + bump.u0(x); };
        left.ub0 = [base = data.ub0, dir, size](double t) { return base(t) + (size * std::sin(t)) * dir; };
        right.ubL = [base = data.ubL, dir, size](double t) { return base(t) - (size * std::sin(t)) * dir; };
        return {{"interior", interior}, {"left", left}, {"right", right}};
    }

    void stability() {
        std::mt19937_64 rng(ctx.seed);
        StabilityOptions o;
        o.L = cfg.numerics.L;
        o.T = cfg.numerics.T;
        o.eps = cfg.numerics.eps;
        o.fd = cfg.numerics.fd;
        const double a = cfg.numerics.perturbation;
        const auto big = stability_experiment(cfg.system, data, perturbations(a, rng), o);
        rng.seed(ctx.seed);
        const auto small = stability_experiment(cfg.system, data, perturbations(a / 2, rng), o);
        const bool finite = std::isfinite(big.L1_const) && std::isfinite(small.L1_const) && std::isfinite(big.L2_const);
        const bool halving = big.L1_const > 0 && std::abs(small.L1_const / big.L1_const - 1.0) <= 0.2;
        const bool ok = finite && halving && big.modulus_pairs >= 3;
        auto report = [](const StabilityReport& r) {
            json j;
            j["L1_const"] = r.L1_const;
            j["L2_const"] = r.L2_const;
            j["modulus_pairs"] = r.modulus_pairs;
            for (const auto& p : r.pairs)
                j["pairs"].push_back({{"label", p.label},
                                      {"data_distance", p.data_distance},
                                      {"max_ratio", p.max_ratio},
                                      {"degenerate", p.degenerate}});
            return j;
        };
        json j;
        j["perturbation"] = a;
        j["seed"] = ctx.seed;
        j["full"] = report(big);
        j["half"] = report(small);
        j["ok"] = ok;
        write_file(ctx.out_dir, "verify_stability.json", dump(j));
        log("stability: L1=" + num(big.L1_const) + " L1(half)=" + num(small.L1_const) + " L2=" + num(big.L2_const) +
            (ok ? " ok" : " FAILED"));
        accepted = accepted && ok;
    }

    void convergence() {
        ConvergenceOptions o;
        o.l = cfg.numerics.L;
        o.fd.dx_target = cfg.numerics.rescaled_dx;
        const auto a = convergence_experiment(cfg.system, data, cfg.numerics.eps_ladder, cfg.numerics.t_eval, o);
        const auto b = convergence_experiment(cfg.system, data, cfg.numerics.eps_ladder_b, cfg.numerics.t_eval, o);
        const auto agree = ladders_agree(a, b);
        const bool ok = a.cauchy_ok && b.cauchy_ok && agree.ok;
        auto report = [](const ConvergenceReport& r) {
            return json{{"eps", r.eps}, {"gaps", r.gaps}, {"cauchy_ok", r.cauchy_ok}, {"slope", r.slope}};
        };
        json j{{"ladder_a", report(a)},
               {"ladder_b", report(b)},
               {"limit_distance", agree.distance},
               {"finest_gap", agree.finest_gap},
               {"ok", ok}};
        write_file(ctx.out_dir, "verify_convergence.json", dump(j));
        log("convergence: slope=" + num(a.slope) + " limit_distance=" + num(agree.distance) + (ok ? " ok" : " FAILED"));
        accepted = accepted && ok;
    }

    void viscosity() {
        const auto& n = cfg.numerics;
        if (n.points.empty()) fail(ErrorKind::ConfigError, "[numerics] points: the viscosity suite needs test points");
        FdOptions fd;
        fd.dx_target = n.rescaled_dx;
        const auto lim = extrapolated_limit(cfg.system, data, n.L, n.T, n.limit_eps, n.limit_nt, n.limit_nx, fd);
        ViscosityOptions o;
        o.h_ladder = n.h_ladder;
        o.beta = n.beta;
        o.rho = n.rho;
        o.limit_error = lim.error_estimate;
        const auto rep = viscosity_check(cfg.system, lim.field, data.ub0, data.ubL, n.points, o);
        json j;
        j["limit_eps"] = n.limit_eps;
        j["limit_error"] = lim.error_estimate;
        j["h_ladder"] = rep.h_ladder;
        j["beta"] = rep.beta;
        j["rho"] = rep.rho;
        j["delta1"] = rep.delta1;
        for (const auto& p : rep.points) {
            static const char* kinds[] = {"interior", "left", "right"};
            j["points"].push_back({{"tau", p.point.tau},
                                   {"xi", p.point.xi},
                                   {"kind", kinds[static_cast<int>(p.kind)]},
                                   {"minus", state_json(p.minus)},
                                   {"plus", state_json(p.plus)},
                                   {"riemann", p.riemann},
                                   {"linear", p.linear},
                                   {"local_tv", p.local_tv},
                                   {"C", p.C},
                                   {"trend_ok", p.trend_ok},
                                   {"linear_ok", p.linear_ok}});
        }
        j["ok"] = rep.ok();
        write_file(ctx.out_dir, "verify_viscosity.json", dump(j));
        log("viscosity: points=" + std::to_string(rep.points.size()) + (rep.ok() ? " ok" : " FAILED"));
        accepted = accepted && rep.ok();
    }
};

}  // namespace

State parse_state(const std::string& text) {
    const auto v = parse_list(text);
    if (v.size() != 2) config_error("'" + text + "' is not a state u1, u2");
    return {v[0], v[1]};
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> v;
    for (const auto& p : split(text, ",")) v.push_back(parse_number(p));
    return v;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    std::ostringstream buf;
    buf << in.rdbuf();
    const Reader r(buf.str(), source);
    ExperimentConfig cfg;
    cfg.source = source;
    cfg.system = read_system(r, cfg.system_name);
    cfg.data = read_data(r, cfg.system.u_star);
    cfg.numerics = read_numerics(r);
    if (r.has("pipeline", "stages")) {
        cfg.stages = split(r.raw("pipeline", "stages"), ",");
        for (const auto& s : cfg.stages)
            if (!known_stages().count(s)) r.fail_at("pipeline", "stages", "unknown stage '" + s + "'");
    }
    if (r.has("output", "dir")) cfg.out_dir = r.raw("output", "dir");
    const bool needs_unit = std::any_of(cfg.stages.begin(), cfg.stages.end(),
                                        [](const auto& s) { return s == "decompose" || s == "functionals"; });
    if (needs_unit && cfg.numerics.eps > 0) r.fail_at("numerics", "eps", "the decomposition needs the unit-viscosity run (eps = 0)");
    // data must start inside the neighbourhood where the system is certified
    try {
        const auto d = build_data(cfg);
        const auto& n = cfg.numerics;
        for (int k = 0; k <= 200; ++k) {
            const double x = n.L * k / 200, t = n.T * k / 200;
            for (const State& s : {d.u0(x), d.ub0(t), d.ubL(t)})
                if (!cfg.system.in_box(s)) r.fail_at("data", "kind", "data leave the box |u - u*| <= delta_box");
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError) throw;
        r.fail_at("data", "kind", Reader::strip(e));
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot read config '" + path + "'");
    return parse_config(in, path);
}

DataTriple build_data(const ExperimentConfig& cfg) {
    const auto& s = cfg.data;
    const auto& sys = cfg.system;
    DataTriple d;
    if (s.kind == "constant") {
        d = data::constant(s.state);
    } else if (s.kind == "pulse") {
        d = data::pulse(sys.u_star, s.dir, s.amp, s.x0, s.width);
    } else if (s.kind == "step") {
        d = data::step(s.left, s.right, s.x0);
    } else if (s.kind == "table") {
        d.u0 = data::table(s.u0_table);
        const State a = d.u0(0.0), b = d.u0(cfg.numerics.L);
        d.ub0 = [a](double) { return a; };
        d.ubL = [b](double) { return b; };
    } else if (s.kind == "layer") {
        const auto p = double_profile(sys, s.U0, s.UL, cfg.numerics.L);
        std::vector<std::pair<double, State>> knots;
        for (std::size_t i = 0; i < p.x.size(); ++i) knots.emplace_back(p.x[i], p.z[i]);
        d.u0 = data::table(std::move(knots));
        d.ub0 = [a = s.U0](double) { return a; };
        d.ubL = [b = s.UL](double) { return b; };
    } else {
        config_error("unknown data kind '" + s.kind + "'");
    }
    if (!s.ub0_table.empty()) d.ub0 = data::table(s.ub0_table);
    if (!s.ubL_table.empty()) d.ubL = data::table(s.ubL_table);
    return d;
}

// ------------------------------------------------------------------ writers

void write_solution_csv(std::ostream& os, const GridField& f) {
    os << "t,x,u1,u2\n";
    for (int n = 0; n < f.nt(); ++n)
        for (int i = 0; i < f.nx(); ++i) {
            const State& s = f.at(n, i);
            os << num(f.t[n]) << ',' << num(f.x[i]) << ',' << num(s.u1) << ',' << num(s.u2) << '\n';
        }
}

void write_decomposition_csv(std::ostream& os, const DecompFields& d) {
    os << "t,x,v1,v2,p1,p2,w1,w2,s1_residual\n";
    for (int n = 0; n < d.v1.nt; ++n)
        for (int i = 0; i < d.v1.nx; ++i)
            os << num(d.t[n]) << ',' << num(d.x[i]) << ',' << num(d.v1(n, i)) << ',' << num(d.v2(n, i)) << ','
               << num(d.p1(n, i)) << ',' << num(d.p2(n, i)) << ',' << num(d.w1(n, i)) << ',' << num(d.w2(n, i)) << ','
               << num(d.s1_residual(n, i)) << '\n';
}

void write_profile_csv(std::ostream& os, const DoubleProfile& p) {
    os << "x,u1,u2,p1,p2\n";
    for (std::size_t i = 0; i < p.x.size(); ++i)
        os << num(p.x[i]) << ',' << num(p.z[i].u1) << ',' << num(p.z[i].u2) << ',' << num(p.p1[i]) << ','
           << num(p.p2[i]) << '\n';
}

void write_fan_csv(std::ostream& os, const WaveFan& fan, double xi_min, double xi_max, int samples) {
    if (samples < 2 || !(xi_max > xi_min)) fail(ErrorKind::InvalidArgument, "fan sampling needs xi_min < xi_max and 2 samples");
    os << "xi,u1,u2\n";
    for (int k = 0; k < samples; ++k) {
        const double xi = xi_min + (xi_max - xi_min) * k / (samples - 1);
        const State s = fan.evaluate(xi);
        os << num(xi) << ',' << num(s.u1) << ',' << num(s.u2) << '\n';
    }
}

std::string fan_json(const WaveFan& fan, int indent) {
    json j;
    j["s1"] = fan.s1;
    j["s2"] = fan.s2;
    static const char* kinds[] = {"constant", "rarefaction", "jump"};
    j["segments"] = json::array();
    for (const auto& g : fan.segments) {
        json seg{{"kind", kinds[static_cast<int>(g.kind)]}, {"family", g.family}};
        // infinite outer speeds are written as null
        seg["speed_lo"] = std::isfinite(g.speed_lo) ? json(g.speed_lo) : json(nullptr);
        seg["speed_hi"] = std::isfinite(g.speed_hi) ? json(g.speed_hi) : json(nullptr);
        seg["speeds"] = json::array();
        for (double v : g.speeds) seg["speeds"].push_back(std::isfinite(v) ? json(v) : json(nullptr));
        seg["states"] = json::array();
        for (const auto& s : g.states) seg["states"].push_back(state_json(s));
        j["segments"].push_back(seg);
    }
    if (fan.side) j["side"] = *fan.side == BoundarySide::Left ? "left" : "right";
    if (fan.trace) j["trace"] = state_json(*fan.trace);
    if (fan.layer) {
        j["layer"] = {{"boundary_state", state_json(fan.layer->u.front())},
                      {"far_state", state_json(fan.layer->u.back())},
                      {"limit", state_json(fan.layer->limit)},
                      {"decay_rate", fan.layer->decay_rate}};
    }
    return j.dump(indent) + "\n";
}

void write_kernel_csv(std::ostream& os, const KernelSpec& spec, const std::vector<double>& times, int nx,
                      const std::vector<double>& ys) {
    if (nx < 2) fail(ErrorKind::InvalidArgument, "kernel dump needs nx >= 2");
    os << "t,x,y,kernel,value,tail_bound\n";
    auto row = [&](double t, double x, double y, const char* name, const KernelEval& e) {
        os << num(t) << ',' << num(x) << ',' << num(y) << ',' << name << ',' << num(e.value) << ',' << num(e.tail_bound)
           << '\n';
    };
    for (double t : times)
        for (int i = 0; i < nx; ++i) {
            const double x = spec.L * i / (nx - 1);
            for (double y : ys) {
                row(t, x, y, "delta", delta_kernel(spec, t, x, y));
                row(t, x, y, "delta_tilde", delta_tilde(spec, t, x, y));
            }
            row(t, x, 0.0, "j0", j0_kernel(spec, t, x));
            row(t, x, spec.L, "jL", jL_kernel(spec, t, x));
        }
}

// ----------------------------------------------------------------- pipeline

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ConfigError:
        case ErrorKind::InvalidArgument: return kExitConfig;
        default: return kExitNumerical;
    }
}

int run_stages(const ExperimentConfig& cfg, const std::vector<std::string>& stages, const RunContext& ctx) {
    Pipeline p{cfg, ctx, build_data(cfg), {}, {}, true};
    for (const auto& s : stages) {
        try {
            if (s == "solve") p.solve();
            else if (s == "decompose") p.decompose_stage();
            else if (s == "functionals") p.functionals();
            else if (s == "stability") p.stability();
            else if (s == "convergence") p.convergence();
            else if (s == "viscosity") p.viscosity();
            else fail(ErrorKind::ConfigError, "unknown stage '" + s + "'");
        } catch (const Error& e) {
            throw Error(e.kind(), s + " stage: " + Reader::strip(e));
        }
    }
    return p.accepted ? kExitOk : kExitAcceptance;
}

}  // namespace vv::cli
