#include "vvtri/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "vvtri/kernels.hpp"

namespace vv {

void GridField::resize(int nt, int nx) {
    t.assign(nt, 0.0);
    u.assign(static_cast<std::size_t>(nt) * nx, State{});
    bc0.assign(nt, State{});
    bcL.assign(nt, State{});
}

void GridField::push_row(double time, std::span<const State> values) {
    t.push_back(time);
    u.insert(u.end(), values.begin(), values.end());
    bc0.push_back(values.front());
    bcL.push_back(values.back());
    if (t.size() == 1) ic.assign(values.begin(), values.end());
}

double total_variation(std::span<const State> v) {
    double tv = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) tv += norm1(v[i] - v[i - 1]);
    return tv;
}

double l1_distance(std::span<const State> a, std::span<const State> b, double dx) {
    if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "l1_distance: size mismatch");
    double s = 0.0;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        s += w * norm1(a[i] - b[i]);
    }
    return s * dx;
}

std::vector<State> derivative_x(std::span<const State> v, double dx) {
    const std::size_t n = v.size();
    if (n < 3) fail(ErrorKind::InvalidArgument, "derivative_x needs at least three nodes");
    std::vector<State> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (0.5 / dx) * (v[i + 1] - v[i - 1]);
    d[0] = (0.5 / dx) * (-3.0 * v[0] + 4.0 * v[1] - v[2]);
    d[n - 1] = (0.5 / dx) * (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]);
    return d;
}

double measure_delta1(const DataTriple& data, const State& u_star, double L, double T, int samples) {
    double d = 0.0;
    auto scan = [&](const StateFn& f, double a, double b) {
        if (!f) return;
        State prev = f(a);
        double tv = 0.0, sup = norm_inf(prev - u_star);
        for (int k = 1; k < samples; ++k) {
            const State cur = f(a + (b - a) * k / (samples - 1));
            tv += norm1(cur - prev);
            sup = std::max(sup, norm_inf(cur - u_star));
            prev = cur;
        }
        d = std::max({d, tv, sup});
    };
    scan(data.u0, 0.0, L);
    scan(data.ub0, 0.0, T);
    scan(data.ubL, 0.0, T);
    return d;
}

namespace data {

DataTriple constant(const State& u) {
    auto f = [u](double) { return u; };
    return {f, f, f, 0.0};
}

DataTriple pulse(const State& u_star, const State& dir, double amp, double x0, double width) {
    DataTriple d;
    d.u0 = [=](double x) {
        const double s = (x - x0) / width;
        if (std::abs(s) >= 1.0) return u_star;
        const double c = std::cos(0.5 * std::numbers::pi * s);
        return u_star + (amp * c * c * c * c) * dir;
    };
    d.ub0 = [u_star](double) { return u_star; };
    d.ubL = d.ub0;
    return d;
}

DataTriple step(const State& left, const State& right, double x0) {
    DataTriple d;
    d.u0 = [=](double x) { return x < x0 ? left : right; };
    d.ub0 = [left](double) { return left; };
    d.ubL = [right](double) { return right; };
    return d;
}

StateFn table(std::vector<std::pair<double, State>> knots) {
    if (knots.empty()) fail(ErrorKind::InvalidArgument, "empty data table");
    std::sort(knots.begin(), knots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return [k = std::move(knots)](double x) {
        if (x <= k.front().first) return k.front().second;
        if (x >= k.back().first) return k.back().second;
        auto it = std::upper_bound(k.begin(), k.end(), x, [](double v, const auto& p) { return v < p.first; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double w = (x - a.first) / (b.first - a.first);
        return (1.0 - w) * a.second + w * b.second;
    };
}

DataTriple with_delta1(DataTriple d, const State& u_star, double L, double T) {
    d.delta1 = measure_delta1(d, u_star, L, T);
    return d;
}

}  // namespace data

namespace {

double max_speed_on_box(const TriangularSystem& sys) {
    double m = 0.0;
    const int n = 9;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const State u = sys.u_star + sys.delta_box * State{-1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1)};
            m = std::max({m, std::abs(sys.lambda1(u)), std::abs(sys.lambda2(u))});
        }
    return m;
}

void finalize(SolveReport& rep) {
    const auto& f = rep.field;
    const double dx = f.dx();
    rep.tv_history.clear();
    rep.ux_l1.clear();
    rep.uxx_l1.clear();
    for (int n = 0; n < f.nt(); ++n) {
        const auto r = f.row(n);
        const double tv = total_variation(r);
        rep.tv_history.push_back(tv);
        rep.ux_l1.push_back(tv);
        double s = 0.0;
        for (int i = 1; i + 1 < f.nx(); ++i) s += norm1(r[i + 1] - 2.0 * r[i] + r[i - 1]);
        rep.uxx_l1.push_back(s / dx);
    }
}

bool row_ok(const TriangularSystem& sys, std::span<const State> r) {
    for (const auto& s : r)
        if (!s.finite() || !sys.in_box(s, 1.5)) return false;
    return true;
}

std::vector<double> uniform(double L, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = L * i / (n - 1);
    x.back() = L;
    return x;
}

}  // namespace

int fd_step_count(const TriangularSystem& sys, double L, double T, const FdOptions& opt) {
    if (opt.nt > 0) return opt.nt;
    const int nx = opt.dx_target > 0.0 ? static_cast<int>(std::ceil(L / opt.dx_target)) + 1 : opt.nx;
    const double dx = L / (nx - 1);
    const double vmax = std::max(max_speed_on_box(sys), 1e-12);
    const double limit = (opt.ab2 ? 1.0 : 2.0) / (2.0 * opt.upwind_order);
    const double cfl_target = opt.cfl_target > 0.0 ? opt.cfl_target : 0.5 * (opt.cfl_max > 0.0 ? opt.cfl_max : limit);
    return static_cast<int>(std::ceil(T * vmax / (cfl_target * dx)));
}

SolveReport solve_fd(const TriangularSystem& sys, const DataTriple& data, double L, double T, const FdOptions& opt) {
    if (!(L > 0.0) || !(T > 0.0)) fail(ErrorKind::InvalidArgument, "solve_fd needs L > 0 and T > 0");
    if (opt.upwind_order != 1 && opt.upwind_order != 2) fail(ErrorKind::InvalidArgument, "upwind_order must be 1 or 2");
    if (opt.theta < 0.0 || opt.theta > 1.0) fail(ErrorKind::InvalidArgument, "theta must lie in [0, 1]");
    const int nx = opt.dx_target > 0.0 ? static_cast<int>(std::ceil(L / opt.dx_target)) + 1 : opt.nx;
    if (nx < 5) fail(ErrorKind::InvalidArgument, "solve_fd needs nx >= 5");
    const double dx = L / (nx - 1);
    const double vmax = std::max(max_speed_on_box(sys), 1e-12);

    if (dx * vmax > 2.0) {
        std::ostringstream os;
        os << "cell Peclet number " << dx * vmax / 2 << " exceeds 1";
        fail(ErrorKind::StabilityViolation, os.str());
    }
    const double cfl_max = opt.cfl_max > 0.0 ? opt.cfl_max : (opt.ab2 ? 1.0 : 2.0) / (2.0 * opt.upwind_order);
    const int nt = fd_step_count(sys, L, T, opt);
    const double dt = T / nt;
    const double r = dt / (dx * dx);
    if (dt * vmax / dx > cfl_max) {
        std::ostringstream os;
        os << "advective CFL " << dt * vmax / dx << " above " << cfl_max;
        fail(ErrorKind::StabilityViolation, os.str());
    }
    if (opt.theta < 0.5 && r * (1.0 - 2.0 * opt.theta) > 0.5) {
        fail(ErrorKind::StabilityViolation, "explicit part of the diffusion is unstable");
    }

    SolveReport rep;
    rep.method = SolveMethod::FiniteDifference;
    rep.field.L = L;
    rep.field.T = T;
    rep.field.x = uniform(L, nx);

    std::vector<State> u(nx), next(nx), adv(nx), adv_prev(nx), rhs(nx);
    for (int i = 0; i < nx; ++i) u[i] = data.u0(rep.field.x[i]);
    rep.field.push_row(0.0, u);

    // Thomas factorization of (1 + 2 r theta) on the diagonal, -r theta off it.
    const double off = -r * opt.theta, diag = 1.0 + 2.0 * r * opt.theta;
    const int m = nx - 2;
    std::vector<double> cp(m), inv(m);
    for (int k = 0; k < m; ++k) {
        const double den = diag - (k > 0 ? off * cp[k - 1] : 0.0);
        inv[k] = 1.0 / den;
        cp[k] = off * inv[k];
    }

    const bool second = opt.upwind_order == 2;
    auto advection = [&](const std::vector<State>& v, std::vector<State>& out) {
        for (int j = 1; j < nx - 1; ++j) {
            const Spectral s = spectral(sys, v[j]);
            const State back = (second && j >= 2) ? (0.5 / dx) * (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2])
                                                  : (1.0 / dx) * (v[j] - v[j - 1]);
            const State fwd = (second && j <= nx - 3) ? (0.5 / dx) * (-3.0 * v[j] + 4.0 * v[j + 1] - v[j + 2])
                                                      : (1.0 / dx) * (v[j + 1] - v[j]);
            const State cen = (0.5 / dx) * (v[j + 1] - v[j - 1]);
            auto pick = [&](double lam) { return lam > 0.0 ? back : (lam < 0.0 ? fwd : cen); };
            out[j] = (s.lambda1 * dot(s.ell1, pick(s.lambda1))) * s.r1 + (s.lambda2 * dot(s.ell2, pick(s.lambda2))) * s.r2;
        }
    };

    for (int n = 0; n < nt; ++n) {
        const double t1 = (n + 1 == nt) ? T : (n + 1) * dt;
        advection(u, adv);
        const bool use_ab2 = opt.ab2 && n > 0;
        for (int j = 1; j < nx - 1; ++j) {
            const State e = use_ab2 ? 1.5 * adv[j] - 0.5 * adv_prev[j] : adv[j];
            rhs[j] = u[j] + ((1.0 - opt.theta) * r) * (u[j + 1] - 2.0 * u[j] + u[j - 1]) - dt * e;
        }
        next[0] = data.ub0(t1);
        next[nx - 1] = data.ubL(t1);
        rhs[1] -= off * next[0];
        rhs[nx - 2] -= off * next[nx - 1];
        // forward sweep then back substitution
        std::vector<State>& d = rhs;
        d[1] = inv[0] * d[1];
        for (int k = 1; k < m; ++k) d[k + 1] = inv[k] * (d[k + 1] - off * d[k]);
        next[m] = d[m];
        for (int k = m - 2; k >= 0; --k) next[k + 1] = d[k + 1] - cp[k] * next[k + 2];

        std::swap(adv_prev, adv);
        std::swap(u, next);
        if (!row_ok(sys, u)) {
            rep.diverged = true;
            std::ostringstream os;
            os << "state left 1.5 K at t = " << t1;
            rep.message = os.str();
            break;
        }
        if ((n + 1) % opt.store_every == 0 || n + 1 == nt) rep.field.push_row(t1, u);
    }
    finalize(rep);
    return rep;
}

SolveReport solve_representation(const TriangularSystem& sys, const DataTriple& data, double L, double T,
                                 const RepresentationOptions& opt) {
    if (!(L > 0.0) || !(T > 0.0)) fail(ErrorKind::InvalidArgument, "solve_representation needs L > 0 and T > 0");
    const int nx = opt.nx, nt = opt.nt;
    if (nx < 5 || nt < 1) fail(ErrorKind::InvalidArgument, "solve_representation needs nx >= 5 and nt >= 1");
    const Spectral star = eigensystem(sys, sys.u_star);
    const Mat2 Astar = sys.A(sys.u_star);
    const double lam[2] = {star.lambda1, star.lambda2};
    const State ell[2] = {star.ell1, star.ell2};
    const State rr[2] = {star.r1, star.r2};
    const double h = L / (nx - 1), dt = T / nt;
    const auto x = uniform(L, nx);
    std::vector<double> times(nt + 1);
    for (int n = 0; n <= nt; ++n) times[n] = n * dt;
    times[nt] = T;

    using Mat = Eigen::MatrixXd;
    // Characteristic lattices for each family and lag.
    std::vector<std::vector<DeltaLattice>> lat(2);
    for (int k = 0; k < 2; ++k) {
        const KernelSpec spec{lam[k], L, 40, 1e-14};
        lat[k].reserve(nt);
        for (int l = 1; l <= nt; ++l) lat[k].emplace_back(spec, l * dt, nx);
    }
    auto materialize = [&](const DeltaLattice& D, Mat& M) {
        M.resize(nx, nx);
        for (int j = 0; j < nx; ++j) {
            const double w = (j == 0 || j == nx - 1) ? 0.5 * h : h;
            M(0, j) = 0.0;
            M(nx - 1, j) = 0.0;
            for (int i = 1; i < nx - 1; ++i) M(i, j) = D(i, j) * w;
        }
    };

    // Linear part: initial datum plus boundary Duhamel terms, per family.
    Mat lin[2];
    for (int k = 0; k < 2; ++k) {
        lin[k] = Mat::Zero(nx, nt + 1);
        Eigen::VectorXd z0(nx);
        for (int j = 0; j < nx; ++j) z0(j) = dot(ell[k], data.u0(x[j]) - sys.u_star);
        lin[k].col(0) = z0;
        Mat M;
        for (int l = 1; l <= nt; ++l) {
            materialize(lat[k][l - 1], M);
            lin[k].col(l) = M * z0;
        }
        const KernelSpec spec{lam[k], L, 40, 1e-14};
        auto bdata = [&](const StateFn& f, double t) { return dot(ell[k], f(t) - sys.u_star); };
        for (Side side : {Side::Left, Side::Right}) {
            const StateFn& f = side == Side::Left ? data.ub0 : data.ubL;
            std::vector<double> b(nt + 1);
            for (int n = 0; n <= nt; ++n) b[n] = bdata(f, times[n]);
            for (int n = 1; n <= nt; ++n) {
                // b(0) J(t) + int_0^t J(t - s) db(s), midpoint rule on the increments.
                for (int i = 1; i < nx - 1; ++i) {
                    double v = b[0] != 0.0 ? b[0] * j_kernel_derivs(spec, side, times[n], x[i]).value : 0.0;
                    for (int q = 0; q < n; ++q) {
                        const double db = b[q + 1] - b[q];
                        if (db != 0.0) v += db * j_kernel_derivs(spec, side, times[n] - 0.5 * (times[q] + times[q + 1]), x[i]).value;
                    }
                    lin[k](i, n) += v;
                }
            }
        }
    }

    GridField field;
    field.L = L;
    field.T = T;
    field.x = x;
    auto assemble = [&](const Mat& z1, const Mat& z2) {
        std::vector<State> u(static_cast<std::size_t>(nt + 1) * nx);
        for (int n = 0; n <= nt; ++n)
            for (int i = 0; i < nx; ++i) {
                State v = sys.u_star + z1(i, n) * rr[0] + z2(i, n) * rr[1];
                if (n > 0 && i == 0) v = data.ub0(times[n]);
                if (n > 0 && i == nx - 1) v = data.ubL(times[n]);
                if (n == 0) v = data.u0(x[i]);
                u[static_cast<std::size_t>(n) * nx + i] = v;
            }
        return u;
    };
    auto max_l1_gap = [&](const std::vector<State>& a, const std::vector<State>& b) {
        double g = 0.0;
        for (int n = 0; n <= nt; ++n) {
            std::span<const State> ra(a.data() + static_cast<std::size_t>(n) * nx, nx);
            std::span<const State> rb(b.data() + static_cast<std::size_t>(n) * nx, nx);
            g = std::max(g, l1_distance(ra, rb, h));
        }
        return g;
    };

    std::vector<State> u = assemble(lin[0], lin[1]);
    SolveReport rep;
    rep.method = SolveMethod::RepresentationFixedPoint;
    double prev_gap = -1.0;
    Mat F[2] = {Mat(nx, nt + 1), Mat(nx, nt + 1)};
    Mat M;
    for (int it = 1;; ++it) {
        // Source (A* - A(u)) u_y in characteristic components.
        for (int n = 0; n <= nt; ++n) {
            std::span<const State> row(u.data() + static_cast<std::size_t>(n) * nx, nx);
            const auto uy = derivative_x(row, h);
            for (int j = 0; j < nx; ++j) {
                const Mat2 A = sys.A(row[j]);
                const Mat2 D{Astar.a11 - A.a11, Astar.a12 - A.a12, Astar.a21 - A.a21, Astar.a22 - A.a22};
                const State s = D * uy[j];
                F[0](j, n) = dot(ell[0], s);
                F[1](j, n) = dot(ell[1], s);
            }
        }
        Mat z[2];
        for (int k = 0; k < 2; ++k) {
            Mat S = Mat::Zero(nx, nt + 1);
            // lag 0: the kernel is the identity; trapezoid end weight 1/2
            S.block(1, 1, nx - 2, nt) += 0.5 * F[k].block(1, 1, nx - 2, nt);
            for (int l = 1; l <= nt; ++l) {
                materialize(lat[k][l - 1], M);
                // columns m = 0..nt-l contribute to n = m + l; m = 0 has weight 1/2
                Mat contrib = M * F[k].leftCols(nt - l + 1);
                contrib.col(0) *= 0.5;
                S.rightCols(nt - l + 1) += contrib;
            }
            z[k] = lin[k] + dt * S;
        }
        std::vector<State> un = assemble(z[0], z[1]);
        const double gap = max_l1_gap(un, u);
        u.swap(un);
        rep.iterations = it;
        if (prev_gap > 0.0) rep.contraction = gap / prev_gap;
        if (gap <= opt.picard_tol) break;
        const bool escaped = !row_ok(sys, std::span<const State>(u.data(), u.size()));
        if ((it >= 3 && rep.contraction >= 1.0) || escaped || it >= opt.max_iter || !std::isfinite(gap)) {
            std::ostringstream os;
            os << "Picard iteration " << it << ": gap " << gap << ", contraction factor " << rep.contraction
               << (escaped ? ", iterate left 1.5 K" : "");
            fail(ErrorKind::NoContraction, os.str());
        }
        prev_gap = gap;
    }

    for (int n = 0; n <= nt; ++n)
        field.push_row(times[n], std::span<const State>(u.data() + static_cast<std::size_t>(n) * nx, nx));
    rep.field = std::move(field);
    finalize(rep);
    return rep;
}

SolveReport solve_eps(const TriangularSystem& sys, const DataTriple& data, double l, double eps, double T,
                      const FdOptions& opt) {
    if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "solve_eps needs eps > 0");
    DataTriple r;
    r.u0 = [f = data.u0, eps](double x) { return f(eps * x); };
    r.ub0 = [f = data.ub0, eps](double t) { return f(eps * t); };
    r.ubL = [f = data.ubL, eps](double t) { return f(eps * t); };
    r.delta1 = data.delta1;
    SolveReport rep = solve_fd(sys, r, l / eps, T / eps, opt);
    auto& f = rep.field;
    for (auto& v : f.x) v *= eps;
    for (auto& v : f.t) v *= eps;
    f.x.back() = l;
    f.L = l;
    f.T = T;
    for (auto& v : rep.uxx_l1) v /= eps;
    return rep;
}

double measure_refinement_order(const TriangularSystem& sys, const DataTriple& data, double L, double T,
                                FdOptions opt) {
    opt.dx_target = 0.0;
    opt.store_every = 1 << 30;
    const int nx0 = opt.nx, nt0 = opt.nt;
    std::vector<std::vector<State>> finals;
    for (int level = 0; level < 3; ++level) {
        const int f = 1 << level;
        opt.nx = (nx0 - 1) * f + 1;
        opt.nt = nt0 > 0 ? nt0 * f : 0;
        const auto rep = solve_fd(sys, data, L, T, opt);
        if (rep.diverged) fail(ErrorKind::Diverged, "refinement run diverged: " + rep.message);
        const auto last = rep.field.row(rep.field.nt() - 1);
        std::vector<State> coarse(nx0);
        for (int i = 0; i < nx0; ++i) coarse[i] = last[static_cast<std::size_t>(i) * f];
        finals.push_back(std::move(coarse));
    }
    const double dx = L / (nx0 - 1);
    const double e1 = l1_distance(finals[0], finals[1], dx);
    const double e2 = l1_distance(finals[1], finals[2], dx);
    if (e2 == 0.0) return std::numeric_limits<double>::infinity();
    return std::log2(e1 / e2);
}

UxxBound uxx_bound_check(const SolveReport& report, double delta1, double c_max) {
    UxxBound b;
    const auto& t = report.field.t;
    for (std::size_t n = 0; n < t.size() && n < report.uxx_l1.size(); ++n) {
        if (t[n] <= 0.0) continue;
        const double v = t[n] <= 1.0 ? std::sqrt(t[n]) * report.uxx_l1[n] : report.uxx_l1[n];
        b.sup_scaled = std::max(b.sup_scaled, v);
    }
    b.c_prime = delta1 > 0.0 ? b.sup_scaled / delta1 : (b.sup_scaled == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    b.ok = b.c_prime <= c_max;
    return b;
}

}  // namespace vv
