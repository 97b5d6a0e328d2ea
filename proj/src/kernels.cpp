#include "vvtri/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

namespace vv {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive_time(double t) {
    if (!(t > 0.0)) {
        std::ostringstream os;
        os << "kernel evaluated at t = " << t;
        fail(ErrorKind::NonpositiveTime, os.str());
    }
}

double log_erfc(double z) {
    if (z < 25.0) return std::log(std::erfc(z));
    const double z2 = z * z;
    return -z2 - std::log(z * kSqrtPi) + std::log1p(-0.5 / z2 + 0.75 / (z2 * z2));
}

// log of int_lo^hi G(t, s - c) ds, accurate far into both Gaussian tails.
double log_mass(double t, double c, double lo, double hi) {
    const double s = 2.0 * std::sqrt(t);
    const double a = (lo - c) / s;
    const double b = (hi - c) / s;
    if (b <= a) return kNegInf;
    if (a >= 0.0) {
        const double la = log_erfc(a), lb = log_erfc(b);
        return std::log(0.5) + la + std::log1p(-std::exp(lb - la));
    }
    if (b <= 0.0) {
        const double la = log_erfc(-b), lb = log_erfc(-a);
        return std::log(0.5) + la + std::log1p(-std::exp(lb - la));
    }
    return std::log(0.5 * (std::erf(b) - std::erf(a)));
}

// exp(E) * G(t, s)
double gexp(double t, double s, double E) {
    return std::exp(E - s * s / (4.0 * t)) / (2.0 * kSqrtPi * std::sqrt(t));
}

struct Acc {
    double v = 0, d1 = 0, d2 = 0, mag = 0;
    void add(double a, double b, double c, double t) {
        v += a;
        d1 += b;
        d2 += c;
        mag += std::abs(a) + std::sqrt(t) * std::abs(b) + t * std::abs(c);
    }
};

// sgn * exp(E0 + dE*x) * G(t, s0 + x), differentiated in x.
void add_point(Acc& acc, double t, double sgn, double s, double E, double dE) {
    const double val = sgn * gexp(t, s, E);
    const double k = dE - s / (2.0 * t);
    acc.add(val, val * k, val * (k * k - 1.0 / (2.0 * t)), t);
}

// sgn * exp(E) * int_lo^hi G(t, z - c) dz with dE/dx = dE, dc/dx = dc.
void add_mass(Acc& acc, double t, double sgn, double E, double dE, double c, double dc, double lo, double hi) {
    const double lm = log_mass(t, c, lo, hi);
    const double val = (lm == kNegInf) ? 0.0 : sgn * std::exp(E + lm);
    const double glo = gexp(t, lo - c, E), ghi = gexp(t, hi - c, E);
    const double m1 = glo - ghi;
    const double m2 = (lo - c) / (2.0 * t) * glo - (hi - c) / (2.0 * t) * ghi;
    acc.add(val, dE * val + sgn * dc * m1, dE * dE * val + sgn * (2.0 * dE * dc * m1 + dc * dc * m2), t);
}

template <class AddTerm>
KernelDerivs sum_images(const KernelSpec& spec, double t, AddTerm&& add_m, const char* name) {
    auto shell = [&](int k) {
        Acc a;
        add_m(k, a);
        if (k != 0) add_m(-k, a);
        return a;
    };
    Acc total = shell(0);
    double prev = total.mag;
    for (int k = 1;; ++k) {
        const Acc next = shell(k);
        const double r = prev > 0.0 ? next.mag / prev : 0.0;
        if (next.mag == 0.0 || (r < 1.0 && next.mag / (1.0 - r) <= spec.tail_tol)) {
            KernelDerivs out;
            out.value = total.v;
            out.dx = total.d1;
            out.dxx = total.d2;
            out.tail_bound = next.mag == 0.0 ? 0.0 : next.mag / (1.0 - r);
            return out;
        }
        if (k > spec.m_max) {
            std::ostringstream os;
            os << name << ": image shell " << k << " still of size " << next.mag << " at t = " << t
               << " (m_max = " << spec.m_max << ")";
            fail(ErrorKind::TruncationOverflow, os.str());
        }
        total.v += next.v;
        total.d1 += next.d1;
        total.d2 += next.d2;
        prev = next.mag;
    }
}

KernelDerivs delta_series(const KernelSpec& spec, double t, double x, double y) {
    require_positive_time(t);
    const double lam = spec.lambda, L = spec.L;
    return sum_images(
        spec, t,
        [&](int m, Acc& acc) {
            const double a = x - y + 2.0 * m * L - lam * t;
            const double b = x + y + 2.0 * m * L - lam * t;
            add_point(acc, t, 1.0, a, -lam * m * L, 0.0);
            add_point(acc, t, -1.0, b, -lam * (y + m * L), 0.0);
        },
        "delta_kernel");
}

KernelDerivs delta_tilde_series(const KernelSpec& spec, double t, double x, double y) {
    require_positive_time(t);
    const double lam = spec.lambda, L = spec.L;
    return sum_images(
        spec, t,
        [&](int m, Acc& acc) {
            const double shift = 2.0 * m * L - lam * t;
            add_point(acc, t, 1.0, x - y + shift, -lam * m * L, 0.0);
            add_point(acc, t, 1.0, x + y + shift, -lam * (y + m * L), 0.0);
            add_point(acc, t, -1.0, x - L + shift, -lam * m * L, 0.0);
            add_point(acc, t, -1.0, x + L + shift, -lam * (L + m * L), 0.0);
            if (lam != 0.0 && y < L) {
                const double c = -(x + 2.0 * m * L + lam * t);
                add_mass(acc, t, -lam, lam * (x + m * L), lam, c, -1.0, y, L);
            }
        },
        "delta_tilde");
}

double clamp_unit(double v, double tol) {
    if (v < 0.0 && v >= -tol) return 0.0;
    if (v > 1.0 && v <= 1.0 + tol) return 1.0;
    return v;
}

}  // namespace

double heat(double t, double x) {
    require_positive_time(t);
    return gexp(t, x, 0.0);
}

KernelEval delta_kernel(const KernelSpec& spec, double t, double x, double y) {
    const auto d = delta_series(spec, t, x, y);
    return {d.value, d.tail_bound};
}

KernelEval delta_kernel_x(const KernelSpec& spec, double t, double x, double y) {
    const auto d = delta_series(spec, t, x, y);
    return {d.dx, d.tail_bound};
}

KernelDerivs j_kernel_derivs(const KernelSpec& spec, Side side, double t, double x) {
    require_positive_time(t);
    const double lam = spec.lambda, L = spec.L;
    if (std::abs(lam) < 1e-8) {
        fail(ErrorKind::CharacteristicDrift, "boundary kernels need |lambda| >= 1e-8");
    }
    // A = -1/(e^{lam L} - 1), B = 1 - A, kept in sign/log form to survive large lam*L.
    const double logA = lam > 0 ? -(lam * L + std::log(-std::expm1(-lam * L))) : -std::log(-std::expm1(lam * L));
    const double sA = lam > 0 ? -1.0 : 1.0;
    const double B = lam > 0 ? -1.0 / std::expm1(-lam * L) : std::exp(lam * L) / std::expm1(lam * L);

    // J = a1 e^{lam x} + a0 - a1 I(lam) - a0 I(0), I(alpha) = int Delta e^{alpha y} dy.
    double s1, log1, s0, log0;
    if (side == Side::Left) {
        s1 = sA, log1 = logA;
        s0 = B > 0 ? 1.0 : -1.0, log0 = std::log(std::abs(B));
    } else {
        s1 = -sA, log1 = logA;
        s0 = sA, log0 = logA;
    }

    auto series = sum_images(
        spec, t,
        [&](int m, Acc& acc) {
            const double mL = m * L;
            // -a1 * I(lam)
            add_mass(acc, t, -s1, log1 + lam * (x + mL), lam, x + 2 * mL + lam * t, 1.0, 0.0, L);
            add_mass(acc, t, s1, log1 - lam * mL, 0.0, -(x + 2 * mL - lam * t), -1.0, 0.0, L);
            // -a0 * I(0)
            add_mass(acc, t, -s0, log0 - lam * mL, 0.0, x + 2 * mL - lam * t, 1.0, 0.0, L);
            add_mass(acc, t, s0, log0 + lam * (x + mL), lam, -(x + 2 * mL + lam * t), -1.0, 0.0, L);
        },
        side == Side::Left ? "j0_kernel" : "jL_kernel");

    const double e = s1 * std::exp(log1 + lam * x);
    KernelDerivs out;
    out.value = e + s0 * std::exp(log0) + series.value;
    out.dx = lam * e + series.dx;
    out.dxx = lam * lam * e + series.dxx;
    out.tail_bound = series.tail_bound;
    out.value = clamp_unit(out.value, 1e-12 + 4.0 * out.tail_bound);
    return out;
}

KernelEval j0_kernel(const KernelSpec& spec, double t, double x) {
    const auto d = j_kernel_derivs(spec, Side::Left, t, x);
    return {d.value, d.tail_bound};
}

KernelEval jL_kernel(const KernelSpec& spec, double t, double x) {
    const auto d = j_kernel_derivs(spec, Side::Right, t, x);
    return {d.value, d.tail_bound};
}

DeltaLattice::DeltaLattice(const KernelSpec& spec, double t, int n) : n_(n), off_(n - 1) {
    require_positive_time(t);
    if (n < 2) fail(ErrorKind::InvalidArgument, "DeltaLattice needs at least two nodes");
    const double lam = spec.lambda, L = spec.L, h = L / (n - 1);
    if (std::abs(lam) * L > 600.0) fail(ErrorKind::InvalidArgument, "DeltaLattice: |lambda| L too large for the factored form");
    p_.resize(3 * n - 2);
    e_.resize(n);
    double emax = 0.0;
    for (int j = 0; j < n; ++j) {
        e_[j] = std::exp(-lam * j * h);
        emax = std::max(emax, e_[j]);
    }
    // The exp(-lambda y) factor amplifies the truncation error of P.
    KernelSpec scaled = spec;
    scaled.tail_tol = spec.tail_tol / (1.0 + emax);
    double tail = 0.0;
    for (int k = -(n - 1); k <= 2 * n - 2; ++k) {
        const double z = k * h;
        const auto d = sum_images(
            scaled, t, [&](int m, Acc& acc) { add_point(acc, t, 1.0, z + 2.0 * m * L - lam * t, -lam * m * L, 0.0); },
            "DeltaLattice");
        p_[k + off_] = d.value;
        tail = std::max(tail, d.tail_bound);
    }
    tail_ = tail * (1.0 + emax);
}

KernelEval delta_tilde(const KernelSpec& spec, double t, double x, double y) {
    if (y >= spec.L) return {0.0, 0.0};
    const auto d = delta_tilde_series(spec, t, x, y);
    return {d.value, d.tail_bound};
}

KernelEval delta_tilde_x(const KernelSpec& spec, double t, double x, double y) {
    if (y >= spec.L) return {0.0, 0.0};
    const auto d = delta_tilde_series(spec, t, x, y);
    return {d.dx, d.tail_bound};
}

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

double theta_integrand(const KernelSpec& spec, double t, double z, double y, double& tail) {
    const double lam = spec.lambda, L = spec.L;
    const auto d = sum_images(
        spec, t,
        [&](int m, Acc& acc) {
            const double a = z - y + 2.0 * m * L;
            const double b = z + y + 2.0 * m * L;
            const double va = -a / (2.0 * t) * gexp(t, a - lam * t, -lam * m * L);
            const double vb = -b / (2.0 * t) * gexp(t, b - lam * t, -lam * (y + m * L));
            acc.v += va + vb;
            acc.mag += std::abs(va) + std::abs(vb);
        },
        "theta_kernel");
    tail = std::max(tail, d.tail_bound);
    return d.value;
}

double integrate_checked(const std::function<double(double)>& f, double a, double b, double tol, const char* what) {
    if (b <= a) return 0.0;
    double err = 0.0, l1 = 0.0;
    const double v = GK::integrate(f, a, b, 12, tol, &err, &l1);
    if (!std::isfinite(v) || err > std::max(1e-12, 100.0 * tol * l1)) {
        std::ostringstream os;
        os << what << ": quadrature error estimate " << err << " on [" << a << ", " << b << "]";
        fail(ErrorKind::QuadratureFailure, os.str());
    }
    return v;
}

}  // namespace

KernelEval theta_kernel(const KernelSpec& spec, double t, double x, double y) {
    require_positive_time(t);
    double tail = 0.0;
    auto f = [&](double z) { return theta_integrand(spec, t, z, y, tail); };
    const double split = std::clamp(y, 0.0, x);
    const double v = integrate_checked(f, 0.0, split, 1e-12, "theta_kernel") +
                     integrate_checked(f, split, x, 1e-12, "theta_kernel");
    return {v, tail * std::max(x, 1.0)};
}

KernelEval b_kernel(const KernelSpec& spec, double t, double x) {
    require_positive_time(t);
    const double lam = spec.lambda, L = spec.L;
    double tail = 0.0;
    // Psi(z) = int_0^L phi(t,z,y) N_z(t,z,y) dy, integrated over y term by term
    // (both image families reduce to Gaussian boundary values and masses).
    auto psi = [&](double z) {
        const auto d = sum_images(
            spec, t,
            [&](int m, Acc& acc) {
                const double mL = m * L;
                const double w0 = z + 2 * mL - lam * t, wL = w0 - L;
                double v = gexp(t, w0, -lam * mL) - gexp(t, wL, -lam * mL);
                if (lam != 0.0) {
                    const double lm = log_mass(t, 0.0, wL, w0);
                    if (lm != kNegInf) v -= 0.5 * lam * std::exp(-lam * mL + lm);
                }
                const double v0 = w0, vL = w0 + L;
                const double E = lam * (z + mL - lam * t);
                double u = gexp(t, vL, E - lam * vL) - gexp(t, v0, E - lam * v0);
                if (lam != 0.0) {
                    const double lm = log_mass(t, -2.0 * lam * t, v0, vL);
                    if (lm != kNegInf) u += 0.5 * lam * std::exp(lam * (z + mL) + lm);
                }
                acc.v += v + u;
                acc.mag += std::abs(v) + std::abs(u);
            },
            "b_kernel");
        tail = std::max(tail, d.tail_bound);
        return d.value;
    };
    const double split = std::clamp(x, 0.0, L);
    const double integral = integrate_checked(psi, 0.0, split, 1e-12, "b_kernel");
    return {1.0 - integral, tail * std::max(1.0, x)};
}

std::vector<KernelNormRow> kernel_norm_report(const KernelSpec& spec, const std::vector<double>& t_grid, double y,
                                              int nx) {
    if (y < 0.0) y = 0.5 * spec.L;
    const double dx = spec.L / (nx - 1);
    std::vector<KernelNormRow> rows;
    rows.reserve(t_grid.size());
    for (double t : t_grid) {
        KernelNormRow row;
        row.t = t;
        row.j_min = std::numeric_limits<double>::infinity();
        double jx[2] = {0, 0}, jxx[2] = {0, 0};
        for (int i = 0; i < nx; ++i) {
            const double x = i * dx;
            const double w = (i == 0 || i == nx - 1) ? 0.5 * dx : dx;
            const auto d = delta_series(spec, t, x, y);
            row.delta_l1 += w * std::abs(d.value);
            row.delta_x_l1_sqrt_t += w * std::abs(d.dx);
            const auto dt = delta_tilde_series(spec, t, x, y);
            row.delta_tilde_l1 += w * std::abs(dt.value);
            row.delta_tilde_x_l1_sqrt_t += w * std::abs(dt.dx);
            if (spec.lambda != 0.0) {
                for (int s = 0; s < 2; ++s) {
                    const auto j = j_kernel_derivs(spec, s == 0 ? Side::Left : Side::Right, t, x);
                    row.j_sup = std::max(row.j_sup, j.value);
                    row.j_min = std::min(row.j_min, j.value);
                    jx[s] += w * std::abs(j.dx);
                    jxx[s] += w * std::abs(j.dxx);
                }
            }
        }
        if (spec.lambda == 0.0) row.j_min = 0.0;
        row.j_x_l1 = std::max(jx[0], jx[1]);
        row.j_xx_l1_sqrt_t = std::max(jxx[0], jxx[1]) * std::sqrt(t);
        row.delta_x_l1_sqrt_t *= std::sqrt(t);
        row.delta_tilde_x_l1_sqrt_t *= std::sqrt(t);
        rows.push_back(row);
    }
    return rows;
}

std::size_t KernelCache::KeyHash::operator()(const Key& k) const {
    std::size_t h = std::hash<std::int64_t>{}(k.t);
    h ^= std::hash<std::int64_t>{}(k.x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>{}(k.y) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(k.kind) * 0x85ebca6bULL;
    return h;
}

template <class F>
double KernelCache::lookup(int kind, double t, double x, double y, F&& compute) {
    const Key key{kind, std::llround(t * 1e12), std::llround(x * 1e12), std::llround(y * 1e12)};
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
    }
    // Evaluate at the rounded coordinates so every caller sees the same value.
    const double v = compute(key.t * 1e-12, key.x * 1e-12, key.y * 1e-12);
    std::lock_guard<std::mutex> lock(mutex_);
    return table_.emplace(key, v).first->second;
}

double KernelCache::delta(double t, double x, double y) {
    return lookup(0, t, x, y, [this](double a, double b, double c) { return delta_kernel(spec_, a, b, c).value; });
}
double KernelCache::j0(double t, double x) {
    return lookup(1, t, x, 0.0, [this](double a, double b, double) { return j0_kernel(spec_, a, b).value; });
}
double KernelCache::jL(double t, double x) {
    return lookup(2, t, x, 0.0, [this](double a, double b, double) { return jL_kernel(spec_, a, b).value; });
}
std::size_t KernelCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return table_.size();
}

}  // namespace vv
