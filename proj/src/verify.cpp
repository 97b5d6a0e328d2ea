#include "vvtri/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vvtri/riemann.hpp"

namespace vv {

namespace {

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    return s;
}

double l1_of(const std::function<double(double)>& f, double a, double b, int samples) {
    if (!(b > a)) return 0.0;
    const double h = (b - a) / (samples - 1);
    double s = 0.0;
    for (int k = 0; k < samples; ++k) s += ((k == 0 || k == samples - 1) ? 0.5 : 1.0) * f(a + k * h);
    return s * h;
}

SolveReport run_once(const TriangularSystem& sys, const DataTriple& d, const StabilityOptions& opt) {
    SolveReport r = opt.eps > 0.0 ? solve_eps(sys, d, opt.L, opt.eps, opt.T, opt.fd) : solve_fd(sys, d, opt.L, opt.T, opt.fd);
    if (r.diverged) fail(ErrorKind::Diverged, "stability run diverged: " + r.message);
    return r;
}

// Row of u at time t, linear in time between stored rows.
std::vector<State> row_at(const GridField& u, double t) {
    const auto& T = u.t;
    const int nx = u.nx();
    std::vector<State> out(nx);
    auto it = std::upper_bound(T.begin(), T.end(), t);
    int n1 = static_cast<int>(it - T.begin());
    n1 = std::clamp(n1, 1, u.nt() - 1);
    const int n0 = n1 - 1;
    double a = (t - T[n0]) / (T[n1] - T[n0]);
    a = std::clamp(a, 0.0, 1.0);
    for (int i = 0; i < nx; ++i) out[i] = (1.0 - a) * u.at(n0, i) + a * u.at(n1, i);
    return out;
}

State interp_x(const std::vector<double>& x, const std::vector<State>& v, double xq) {
    if (xq <= x.front()) return v.front();
    if (xq >= x.back()) return v.back();
    const auto it = std::upper_bound(x.begin(), x.end(), xq);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double a = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    return (1.0 - a) * v[i - 1] + a * v[i];
}

std::vector<State> resample(const std::vector<double>& x, const std::vector<State>& v, const std::vector<double>& xq) {
    std::vector<State> out(xq.size());
    for (std::size_t k = 0; k < xq.size(); ++k) out[k] = interp_x(x, v, xq[k]);
    return out;
}

double l1_states(const std::vector<State>& a, const std::vector<State>& b, double dx) { return l1_distance(a, b, dx); }

std::vector<double> uniform(double a, double b, int n) {
    std::vector<double> x(n);
    for (int k = 0; k < n; ++k) x[k] = a + (b - a) * k / (n - 1);
    x.back() = b;
    return x;
}

std::vector<State> final_row(const SolveReport& r) {
    const auto row = r.field.row(r.field.nt() - 1);
    return {row.begin(), row.end()};
}

}  // namespace

// ---------------------------------------------------------------- stability

double data_distance(const DataTriple& a, const DataTriple& b, double L, double T, int samples) {
    const double d0 = l1_of([&](double x) { return norm1(a.u0(x) - b.u0(x)); }, 0.0, L, samples);
    const double d1 = l1_of([&](double t) { return norm1(a.ub0(t) - b.ub0(t)); }, 0.0, T, samples);
    const double d2 = l1_of([&](double t) { return norm1(a.ubL(t) - b.ubL(t)); }, 0.0, T, samples);
    return d0 + d1 + d2;
}

StabilityReport stability_experiment(const TriangularSystem& sys, const DataTriple& base,
                                     const std::vector<LabelledData>& perturbed, const StabilityOptions& opt) {
    StabilityReport rep;
    const SolveReport b = run_once(sys, base, opt);
    const GridField& fb = b.field;
    const double dx = fb.dx();
    for (const auto& p : perturbed) {
        StabilityPair pair;
        pair.label = p.label;
        pair.data_distance = data_distance(base, p.data, opt.L, opt.T);
        if (pair.data_distance == 0.0) {
            pair.degenerate = true;
            rep.pairs.push_back(pair);
            continue;
        }
        const SolveReport r = run_once(sys, p.data, opt);
        if (r.field.nt() != fb.nt() || r.field.nx() != fb.nx())
            fail(ErrorKind::InvalidArgument, "perturbed run produced a different grid");
        for (int n = 0; n < fb.nt(); ++n) {
            const double ratio = l1_distance(r.field.row(n), fb.row(n), dx) / pair.data_distance;
            pair.t.push_back(fb.t[n]);
            pair.ratio.push_back(ratio);
            pair.max_ratio = std::max(pair.max_ratio, ratio);
        }
        rep.L1_const = std::max(rep.L1_const, pair.max_ratio);
        rep.pairs.push_back(std::move(pair));
    }

    std::vector<double> ladder{0.0};
    for (int k = opt.modulus_levels - 1; k >= 0; --k) ladder.push_back(opt.T * std::ldexp(1.0, -k));
    std::vector<std::vector<State>> rows;
    for (double t : ladder) rows.push_back(row_at(fb, t));
    for (std::size_t i = 0; i < ladder.size(); ++i)
        for (std::size_t j = i + 1; j < ladder.size(); ++j) {
            const double ti = ladder[i], tj = ladder[j];
            const double den = std::abs(tj - ti) + std::abs(std::sqrt(tj) - std::sqrt(ti));
            rep.L2_const = std::max(rep.L2_const, l1_states(rows[i], rows[j], dx) / den);
            ++rep.modulus_pairs;
        }
    return rep;
}

// -------------------------------------------------------------- convergence

ConvergenceReport convergence_experiment(const TriangularSystem& sys, const DataTriple& data,
                                         const std::vector<double>& eps_ladder, double t_eval,
                                         const ConvergenceOptions& opt) {
    if (eps_ladder.size() < 2) fail(ErrorKind::InvalidArgument, "convergence needs at least two eps values");
    for (std::size_t k = 1; k < eps_ladder.size(); ++k)
        if (!(eps_ladder[k] < eps_ladder[k - 1])) fail(ErrorKind::InvalidArgument, "eps ladder must decrease");
    ConvergenceReport rep;
    rep.eps = eps_ladder;
    rep.x = uniform(0.0, opt.l, opt.samples);
    const double dx = rep.x[1] - rep.x[0];
    FdOptions fd = opt.fd;
    fd.store_every = 1 << 30;
    std::vector<std::vector<State>> finals;
    for (double eps : eps_ladder) {
        const auto r = solve_eps(sys, data, opt.l, eps, t_eval, fd);
        if (r.diverged) fail(ErrorKind::Diverged, "convergence run diverged: " + r.message);
        finals.push_back(resample(r.field.x, final_row(r), rep.x));
    }
    for (std::size_t k = 0; k + 1 < finals.size(); ++k) rep.gaps.push_back(l1_states(finals[k], finals[k + 1], dx));
    rep.cauchy_ok = true;
    for (std::size_t k = 1; k < rep.gaps.size(); ++k)
        if (rep.gaps[k] > 1.1 * rep.gaps[k - 1]) rep.cauchy_ok = false;

    // least-squares slope of log gap against log eps of the finer run
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t k = 0; k < rep.gaps.size(); ++k) {
        if (!(rep.gaps[k] > 0.0)) continue;
        const double X = std::log(eps_ladder[k + 1]), Y = std::log(rep.gaps[k]);
        sx += X, sy += Y, sxx += X * X, sxy += X * Y, ++m;
    }
    if (m >= 2) rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    const std::size_t f = finals.size() - 1;
    const double ef = eps_ladder[f], ec = eps_ladder[f - 1];
    const double w = ef / (ec - ef);
    rep.limit.resize(rep.x.size());
    for (std::size_t i = 0; i < rep.x.size(); ++i) rep.limit[i] = finals[f][i] + w * (finals[f][i] - finals[f - 1][i]);
    rep.limit_error = rep.gaps.back();
    return rep;
}

LadderAgreement ladders_agree(const ConvergenceReport& a, const ConvergenceReport& b) {
    if (a.x.size() != b.x.size() || a.x.back() != b.x.back())
        fail(ErrorKind::InvalidArgument, "ladders were compared on different grids");
    LadderAgreement out;
    out.distance = l1_states(a.limit, b.limit, a.x[1] - a.x[0]);
    out.finest_gap = std::min(a.limit_error, b.limit_error);
    out.ok = out.distance <= out.finest_gap;
    return out;
}

LimitField extrapolated_limit(const TriangularSystem& sys, const DataTriple& data, double l, double T, double eps,
                              int nt_out, int nx_out, const FdOptions& fd) {
    if (nt_out < 2 || nx_out < 2) fail(ErrorKind::InvalidArgument, "limit grid needs at least two points per axis");
    // store exactly the output times; the step is shortened to a multiple of them
    auto aligned = [&](double e) {
        FdOptions o = fd;
        const int per = (fd_step_count(sys, l / e, T / e, fd) + nt_out - 2) / (nt_out - 1);
        o.nt = per * (nt_out - 1);
        o.store_every = per;
        return solve_eps(sys, data, l, e, T, o);
    };
    const auto fine = aligned(eps);
    const auto coarse = aligned(2 * eps);
    if (fine.diverged || coarse.diverged) fail(ErrorKind::Diverged, "limit run diverged");
    LimitField out;
    out.eps = eps;
    const auto x = uniform(0.0, l, nx_out);
    const auto ts = uniform(0.0, T, nt_out);
    out.field.x = x;
    out.field.L = l;
    out.field.T = T;
    const double dx = x[1] - x[0];
    for (double t : ts) {
        const auto a = resample(fine.field.x, row_at(fine.field, t), x);
        const auto b = resample(coarse.field.x, row_at(coarse.field, t), x);
        out.error_estimate = std::max(out.error_estimate, l1_states(a, b, dx));
        std::vector<State> r(x.size());
        // at t = 0 both runs hold the datum; combining two interpolations of a jump would overshoot
        for (std::size_t i = 0; i < x.size(); ++i) r[i] = t == 0.0 ? data.u0(x[i]) : 2.0 * a[i] - b[i];
        out.field.push_row(t, r);
    }
    return out;
}

// -------------------------------------------------------------- functionals

double interaction_weight(double xi, double c) { return xi < 0 ? std::exp(c * xi) / (2 * c) : 1.0 / (2 * c); }

double interaction_potential(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b,
                             double c) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    auto w = [&](std::size_t i) {
        const double left = i > 0 ? x[i] - x[i - 1] : 0.0, right = i + 1 < n ? x[i + 1] - x[i] : 0.0;
        return 0.5 * (left + right);
    };
    // ahead[i] = sum_{j > i} e^{c (x_i - x_j)} w_j b_j; behind = sum_{j <= i} w_j b_j
    std::vector<double> ahead(n, 0.0);
    for (std::size_t i = n - 1; i-- > 0;) ahead[i] = std::exp(c * (x[i] - x[i + 1])) * (w(i + 1) * b[i + 1] + ahead[i + 1]);
    double behind = 0.0, q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        behind += w(i) * b[i];
        q += w(i) * a[i] * (behind + ahead[i]);
    }
    return q / (2 * c);
}

FunctionalTrace functionals_trace(const DecompFields& d, int stride) {
    FunctionalTrace tr;
    const int nt = d.v1.nt, nx = d.v1.nx;
    if (nt == 0) return tr;
    if (stride <= 0) stride = std::max(1, (nt + 199) / 200);
    const double c = d.c > 0 ? d.c : 1.0;
    const double y = 0.5 * d.L;
    std::vector<double> wq(nx);
    for (int i = 0; i < nx; ++i)
        wq[i] = 0.5 * ((i > 0 ? d.x[i] - d.x[i - 1] : 0.0) + (i + 1 < nx ? d.x[i + 1] - d.x[i] : 0.0));

    std::vector<double> inter_row(nt);
    for (int n = 0; n < nt; ++n) {
        double s = 0.0;
        for (int i = 0; i < nx; ++i) s += wq[i] * std::abs(d.v1(n, i)) * std::abs(d.v2(n, i));
        inter_row[n] = s;
    }
    tr.interaction = trapezoid(d.t, inter_row);

    std::vector<int> rows;
    for (int n = 0; n < nt; n += stride) rows.push_back(n);
    if (rows.back() != nt - 1) rows.push_back(nt - 1);
    std::vector<double> a(nx), b(nx);
    for (int n : rows) {
        for (int i = 0; i < nx; ++i) a[i] = std::abs(d.v1(n, i)), b[i] = std::abs(d.v2(n, i));
        tr.t.push_back(d.t[n]);
        tr.Q.push_back(interaction_potential(d.x, a, b, c));
        double area = 0.0, len = 0.0, wv1 = 0.0, wv2 = 0.0;
        for (int i = 0; i < nx; ++i) {
            const double v = d.v1(n, i), w = d.w1(n, i);
            for (int j = 0; j < i; ++j) area += wq[i] * wq[j] * std::abs(v * d.w1(n, j) - d.v1(n, j) * w);
            len += wq[i] * std::hypot(v, w);
            const double x = d.x[i];
            wv2 += wq[i] * b[i] * (x <= y ? 1.0 : std::exp(c * (y - x))) / c;
            wv1 += wq[i] * a[i] * (x >= y ? 1.0 : std::exp(c * (x - y))) / c;
        }
        tr.area.push_back(0.5 * area);
        tr.length.push_back(len);
        tr.weighted_v1.push_back(wv1);
        tr.weighted_v2.push_back(wv2);
    }
    for (std::size_t k = 1; k < tr.t.size(); ++k) {
        tr.q_drop += std::max(0.0, tr.Q[k - 1] - tr.Q[k]);
        tr.area_increase += std::max(0.0, tr.area[k] - tr.area[k - 1]);
        tr.length_increase += std::max(0.0, tr.length[k] - tr.length[k - 1]);
    }
    const SourceBudget sb = source_budget(d);
    tr.budget = sb.integral_s1 + sb.integral_s2 + sb.e_integral + sb.termwise_total();
    for (double v : sb.boundary_integrals) tr.budget += v;
    tr.near_monotone = tr.area_increase <= tr.budget && tr.length_increase <= tr.budget;
    return tr;
}

// ------------------------------------------------------ viscosity solution

State sample_field(const GridField& u, double t, double x) { return interp_x(u.x, row_at(u, t), x); }

State one_sided_trace(const GridField& u, double tau, double xi, int side, double rho, double tol) {
    const auto row = row_at(u, tau);
    const double dx = u.dx();
    // the cell touching xi interpolates across a jump sitting there, so it is left out
    struct Mean {
        State value;
        double centre;  // distance of the window midpoint from xi
    };
    auto average = [&](double w) {
        const double a = side < 0 ? std::max(u.x.front(), xi - w) : xi + dx;
        const double b = side < 0 ? xi - dx : std::min(u.x.back(), xi + w);
        const int m = std::max(8, static_cast<int>(std::ceil((b - a) / dx)) * 2);
        State s{};
        const double h = (b - a) / m;
        for (int k = 0; k < m; ++k) s += interp_x(u.x, row, a + (k + 0.5) * h);
        return Mean{(1.0 / m) * s, std::abs(0.5 * (a + b) - xi)};
    };
    std::vector<Mean> means;
    for (double w = rho; w >= 3 * dx && means.size() < 5; w *= 0.5) means.push_back(average(w));
    if (means.size() < 2) fail(ErrorKind::InvalidArgument, "trace window rho is below three grid cells");
    const Mean& m1 = means[means.size() - 2];
    const Mean& m2 = means.back();
    const double gap = norm_inf(m2.value - m1.value);
    if (gap > tol) {
        std::ostringstream msg;
        msg << "one-sided averages at (" << tau << ", " << xi << ") move by " << gap;
        fail(ErrorKind::TraceUndefined, msg.str());
    }
    // a mean is off by u_x times its centre distance at smooth points; extrapolate the last two to xi
    return m2.value + (m2.centre / (m1.centre - m2.centre)) * (m2.value - m1.value);
}

bool ViscosityCheckReport::ok() const {
    for (const auto& p : points)
        if (!p.trend_ok || !p.linear_ok) return false;
    return true;
}

ViscosityCheckReport viscosity_check(const TriangularSystem& sys, const GridField& u, const StateFn& ub0,
                                     const StateFn& ubL, const std::vector<TestPoint>& points,
                                     const ViscosityOptions& opt) {
    const auto& H = opt.h_ladder;
    if (H.size() < 4) fail(ErrorKind::InvalidArgument, "h ladder needs at least 4 rungs");
    for (std::size_t k = 1; k < H.size(); ++k)
        if (!(H[k] < H[k - 1]) || !(H[k] > 0)) fail(ErrorKind::InvalidArgument, "h ladder must strictly decrease");
    const double l = u.x.back();
    ViscosityCheckReport rep;
    rep.h_ladder = H;
    double lam = 0.0;
    for (const auto& s : u.u) lam = std::max({lam, std::abs(sys.lambda1(s)), std::abs(sys.lambda2(s))});
    rep.beta = opt.beta > 0 ? opt.beta : 2 * lam;
    rep.rho = opt.rho > 0 ? opt.rho : l / 10;
    if (opt.delta1 > 0) {
        rep.delta1 = opt.delta1;
    } else {
        // the boundary traces start from the initial row, so corner jumps are counted once
        rep.delta1 = total_variation(u.ic) + total_variation(u.bc0) + total_variation(u.bcL);
    }
    const double beta = rep.beta, rho = rep.rho;
    // at least 400 nodes and two per cell of the field
    const double field_dx = u.dx();
    auto nodes = [&](double a, double b) { return std::max(400, 2 * static_cast<int>(std::ceil((b - a) / field_dx)) + 1); };

    for (const auto& pt : points) {
        if (pt.tau + H.front() > u.t.back() + 1e-12) fail(ErrorKind::InvalidArgument, "tau + h exceeds the field horizon");
        PointCheck pc;
        pc.point = pt;
        pc.kind = pt.xi <= 1e-12 ? PointKind::LeftBoundary
                                 : (pt.xi >= l - 1e-12 ? PointKind::RightBoundary : PointKind::Interior);
        std::optional<WaveFan> fan;
        double origin = pt.xi;
        if (pc.kind == PointKind::Interior) {
            pc.minus = one_sided_trace(u, pt.tau, pt.xi, -1, rho, opt.trace_tol);
            pc.plus = one_sided_trace(u, pt.tau, pt.xi, +1, rho, opt.trace_tol);
            fan = solve_riemann(sys, pc.minus, pc.plus);
        } else if (pc.kind == PointKind::LeftBoundary) {
            pc.plus = pc.minus = one_sided_trace(u, pt.tau, 0.0, +1, rho, opt.trace_tol);
            fan = solve_boundary_riemann(sys, pc.plus, ub0(pt.tau), BoundarySide::Left);
            origin = 0.0;
        } else {
            pc.plus = pc.minus = one_sided_trace(u, pt.tau, l, -1, rho, opt.trace_tol);
            fan = solve_boundary_riemann(sys, pc.minus, ubL(pt.tau), BoundarySide::Right);
            origin = l;
        }
        const auto row_tau = row_at(u, pt.tau);
        for (double h : H) {
            const auto row_h = row_at(u, pt.tau + h);
            const double a = std::max(0.0, origin - beta * h), b = std::min(l, origin + beta * h);
            const double q = l1_of([&](double x) { return norm1(interp_x(u.x, row_h, x) - fan->evaluate((x - origin) / h)); },
                                   a, b, nodes(a, b)) / h;
            pc.riemann.push_back(q);
        }
        if (pc.kind == PointKind::Interior) {
            if (beta * H.front() >= rho) fail(ErrorKind::InvalidArgument, "beta * h must stay below rho");
            const double a0 = std::max(0.0, pt.xi - rho), b0 = std::min(l, pt.xi + rho);
            std::vector<State> local;
            const int m = nodes(a0, b0);
            for (int k = 0; k < m; ++k) local.push_back(interp_x(u.x, row_tau, a0 + (b0 - a0) * k / (m - 1)));
            pc.local_tv = total_variation(local);
            const Spectral sp = spectral(sys, interp_x(u.x, row_tau, pt.xi));
            auto frozen = [&](double h, double x) {
                const State left = interp_x(u.x, row_tau, x - sp.lambda1 * h);
                const State right = interp_x(u.x, row_tau, x - sp.lambda2 * h);
                return dot(sp.ell1, left) * sp.r1 + dot(sp.ell2, right) * sp.r2;
            };
            for (double h : H) {
                const auto row_h = row_at(u, pt.tau + h);
                const double a = std::max(0.0, pt.xi - rho + beta * h), b = std::min(l, pt.xi + rho - beta * h);
                const double q =
                    l1_of([&](double x) { return norm1(interp_x(u.x, row_h, x) - frozen(h, x)); }, a, b, nodes(a, b)) / h;
                pc.linear.push_back(q);
                if (pc.local_tv > 0) pc.C = std::max(pc.C, q / (pc.local_tv * pc.local_tv));
            }
            pc.linear_ok = pc.C <= opt.c_max;
        }
        const double slack = opt.limit_error / H.back() + 1e-15;
        pc.trend_ok = pc.riemann.back() <= pc.riemann.front() + slack && pc.riemann.back() <= 0.05 * rep.delta1;
        rep.points.push_back(std::move(pc));
    }
    return rep;
}

}  // namespace vv
