#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <thread>

#include "doctest.h"
#include "vvtri/kernels.hpp"

using namespace vv;

namespace {

// Sine-series Green function of z_t + lam z_x - z_xx = 0 with Dirichlet data,
// written independently of the image construction.
double spectral_delta(double lam, double L, double t, double x, double y) {
    double s = 0.0;
    for (int n = 1; n <= 4000; ++n) {
        const double k = n * std::numbers::pi / L;
        const double e = std::exp(-(k * k) * t);
        if (e < 1e-300) break;
        s += std::sin(k * x) * std::sin(k * y) * e;
    }
    return 2.0 / L * s * std::exp(lam * (x - y) / 2.0 - lam * lam * t / 4.0);
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double residual(const std::function<double(double, double)>& F, double lam, double t, double x) {
    const double ht = 1e-4, hx = 1e-3;
    const double Ft = (F(t + ht, x) - F(t - ht, x)) / (2 * ht);
    const double Fx = (F(t, x + hx) - F(t, x - hx)) / (2 * hx);
    const double Fxx = (F(t, x + hx) - 2 * F(t, x) + F(t, x - hx)) / (hx * hx);
    return Ft + lam * Fx - Fxx;
}

}  // namespace

TEST_CASE("heat kernel closed form and mass") {
    CHECK(heat(1.0, 0.0) == doctest::Approx(0.28209479177387814).epsilon(1e-14));
    CHECK(heat(0.25, 1.0) == doctest::Approx(std::exp(-1.0) / std::sqrt(std::numbers::pi)).epsilon(1e-14));
    CHECK(heat(0.25, 1.0) == doctest::Approx(0.2075537487).epsilon(1e-9));
    for (double t : {0.1, 1.0}) {
        const double m = simpson([t](double x) { return heat(t, x); }, -20, 20, 20000);
        CHECK(std::abs(m - 1.0) < 1e-8);
    }
    CHECK_THROWS_AS(heat(0.0, 1.0), Error);
}

TEST_CASE("delta kernel: isolated peak, Dirichlet zeros, sine-series oracle") {
    KernelSpec s{0.0, 10.0, 8, 1e-12};
    CHECK(delta_kernel(s, 0.01, 5, 5).value == doctest::Approx(2.8209479177).epsilon(1e-9));

    for (double lam : {-1.5, 0.0, 1.0}) {
        KernelSpec k{lam, 4.0, 8, 1e-12};
        for (double t : {0.05, 0.5, 1.0}) {
            for (double y : {0.3, 1.0, 2.7}) {
                CHECK(std::abs(delta_kernel(k, t, 0.0, y).value) <= k.tail_tol);
                CHECK(std::abs(delta_kernel(k, t, k.L, y).value) <= k.tail_tol);
                for (double x : {0.2, 1.1, 2.0, 3.9}) {
                    CAPTURE(lam);
                    CAPTURE(t);
                    CHECK(delta_kernel(k, t, x, y).value ==
                          doctest::Approx(spectral_delta(lam, k.L, t, x, y)).epsilon(1e-9).scale(1.0));
                }
            }
        }
    }
}

TEST_CASE("delta kernel is a sub-probability density") {
    KernelSpec k{1.0, 4.0, 8, 1e-12};
    const double mass = simpson([&](double x) { return delta_kernel(k, 0.5, x, 1.0).value; }, 0, k.L, 4000);
    CHECK(mass <= 1.0 + 1e-8);
    CHECK(mass > 0.5);
}

TEST_CASE("delta kernel reflection symmetry") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double L = 5.0;
    for (int n = 0; n < 200; ++n) {
        const double lam = -2.0 + 4.0 * u01(rng);
        const double t = 0.01 + u01(rng), x = L * u01(rng), y = L * u01(rng);
        const double a = delta_kernel({lam, L, 8, 1e-13}, t, x, y).value;
        const double b = delta_kernel({-lam, L, 8, 1e-13}, t, L - x, L - y).value;
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("boundary kernels: steady state, boundary values, superposition") {
    KernelSpec k{1.0, 4.0, 8, 1e-12};
    const double eL = std::exp(k.L);
    const double A = -1.0 / (eL - 1), B = eL / (eL - 1), C = 1.0 / (eL - 1), D = -1.0 / (eL - 1);
    for (double x : {0.0, 0.5, 2.0, 3.5, 4.0}) {
        CHECK(j0_kernel(k, 50.0, x).value == doctest::Approx(A * std::exp(x) + B).epsilon(1e-10).scale(1.0));
        CHECK(jL_kernel(k, 50.0, x).value == doctest::Approx(C * std::exp(x) + D).epsilon(1e-10).scale(1.0));
    }
    for (double lam : {-1.0, 1.0}) {
        KernelSpec kk{lam, 4.0, 8, 1e-12};
        for (double t : {0.1, 1.0}) {
            CHECK(std::abs(j0_kernel(kk, t, 0.0).value - 1.0) < 1e-10);
            CHECK(std::abs(j0_kernel(kk, t, kk.L).value) < 1e-10);
            CHECK(std::abs(jL_kernel(kk, t, kk.L).value - 1.0) < 1e-10);
            CHECK(std::abs(jL_kernel(kk, t, 0.0).value) < 1e-10);
            for (double x : {0.4, 1.7, 3.2}) {
                // z solves the same equation with zero boundary data and unit initial datum.
                const double z = simpson([&](double y) { return delta_kernel(kk, t, x, y).value; }, 0, kk.L, 4000);
                CHECK(std::abs(j0_kernel(kk, t, x).value + jL_kernel(kk, t, x).value + z - 1.0) <= 1e-6);
            }
        }
    }
    CHECK_THROWS_AS(j0_kernel({0.0, 4.0, 8, 1e-12}, 0.5, 1.0), Error);
}

TEST_CASE("boundary kernel derivatives agree with finite differences") {
    for (double lam : {-2.0, 0.7}) {
        KernelSpec k{lam, 4.0, 8, 1e-13};
        for (Side side : {Side::Left, Side::Right}) {
            for (double t : {0.05, 0.6}) {
                for (double x : {0.3, 2.0, 3.6}) {
                    const double h = 1e-4;
                    const auto d = j_kernel_derivs(k, side, t, x);
                    const double fp = j_kernel_derivs(k, side, t, x + h).value;
                    const double fm = j_kernel_derivs(k, side, t, x - h).value;
                    CHECK(d.dx == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1.0));
                    CHECK(d.dxx == doctest::Approx((fp - 2 * d.value + fm) / (h * h)).epsilon(1e-4).scale(1.0));
                }
            }
        }
    }
}

TEST_CASE("delta_tilde: boundary value and the two derivative identities") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (double lam : {-1.0, 0.0, 1.5}) {
        KernelSpec k{lam, 4.0, 8, 1e-13};
        CHECK(delta_tilde(k, 0.3, 1.2, k.L).value == 0.0);
        for (int n = 0; n < 30; ++n) {
            const double t = 0.05 + u01(rng), x = 0.2 + 3.6 * u01(rng), y = 0.2 + 3.6 * u01(rng);
            const double h = 1e-4;
            const double dty = (delta_tilde(k, t, x, y + h).value - delta_tilde(k, t, x, y - h).value) / (2 * h);
            const double ddx = (delta_kernel(k, t, x + h, y).value - delta_kernel(k, t, x - h, y).value) / (2 * h);
            CHECK(std::abs(dty + ddx) <= 1e-5);
            CHECK(delta_kernel_x(k, t, x, y).value == doctest::Approx(ddx).epsilon(1e-6).scale(1.0));
            const double dtx = (delta_tilde(k, t, x + h, y).value - delta_tilde(k, t, x - h, y).value) / (2 * h);
            CHECK(delta_tilde_x(k, t, x, y).value == doctest::Approx(dtx).epsilon(1e-6).scale(1.0));
            if (lam != 0.0) {
                const double j0x = (j0_kernel(k, t, x + h).value - j0_kernel(k, t, x - h).value) / (2 * h);
                const double jLx = (jL_kernel(k, t, x + h).value - jL_kernel(k, t, x - h).value) / (2 * h);
                CHECK(std::abs(delta_tilde(k, t, x, 0.0).value + j0x + jLx) <= 1e-5);
            }
        }
    }
}

TEST_CASE("PDE residuals of the closed-form kernels at random interior samples") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        const double lam = (n % 2 ? 1.0 : -1.0) * (0.5 + u01(rng));
        KernelSpec k{lam, 4.0, 8, 1e-13};
        const double t = 0.05 + u01(rng), x = 0.1 * k.L + 0.8 * k.L * u01(rng), y = 0.1 * k.L + 0.8 * k.L * u01(rng);
        worst = std::max(worst, std::abs(residual([&](double a, double b) { return delta_kernel(k, a, b, y).value; },
                                                  lam, t, x)));
        worst = std::max(worst, std::abs(residual([&](double a, double b) { return j0_kernel(k, a, b).value; }, lam,
                                                  t, x)));
        worst = std::max(worst, std::abs(residual([&](double a, double b) { return jL_kernel(k, a, b).value; }, lam,
                                                  t, x)));
        worst = std::max(worst, std::abs(residual([&](double a, double b) { return delta_tilde(k, a, b, y).value; },
                                                  lam, t, x)));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("delta kernel recovers smooth initial data as t -> 0") {
    KernelSpec k{0.8, 4.0, 8, 1e-12};
    auto phi = [](double y) { return std::exp(-8.0 * (y - 2.0) * (y - 2.0)); };
    const double phi2max = 16.0;  // sup |phi''|
    for (double x : {1.5, 2.0, 2.4}) {
        const double v = simpson([&](double y) { return delta_kernel(k, 1e-4, x, y).value * phi(y); }, 0, k.L, 40000);
        CHECK(std::abs(v - phi(x)) <= 1e-3 * phi2max);
    }
}

TEST_CASE("positivity and range on a grid") {
    for (double lam : {-1.0, 1.0}) {
        KernelSpec k{lam, 4.0, 8, 1e-12};
        for (double t : {1e-3, 0.02, 0.3, 1.0}) {
            for (int i = 0; i <= 40; ++i) {
                const double x = k.L * i / 40.0;
                for (double y : {0.05, 1.0, 3.0}) CHECK(delta_kernel(k, t, x, y).value >= -k.tail_tol);
                const double j0 = j0_kernel(k, t, x).value, jL = jL_kernel(k, t, x).value;
                CHECK(j0 >= 0.0);
                CHECK(j0 <= 1.0);
                CHECK(jL >= 0.0);
                CHECK(jL <= 1.0);
            }
        }
    }
}

TEST_CASE("truncation overflow is reported when the cap is too small") {
    KernelSpec k{0.0, 1.0, 1, 1e-14};
    CHECK_THROWS_AS(delta_kernel(k, 5.0, 0.3, 0.6), Error);
}

namespace {

// d^2/dz^2 of the Neumann image sum at z = 0, built from heat() by differences.
double neumann_t_at_zero(double L, double t, double y) {
    auto N = [&](double z) {
        double s = 0.0;
        for (int m = -8; m <= 8; ++m) s += heat(t, z + 2 * m * L - y) + heat(t, z + 2 * m * L + y);
        return s;
    };
    const double h = 1e-3;
    return (N(h) - 2 * N(0) + N(-h)) / (h * h);
}

}  // namespace

TEST_CASE("theta and b kernels: boundary behaviour and the defect of the literal formula") {
    for (double lam : {-0.7, 0.0, 1.0}) {
        KernelSpec k{lam, 3.0, 8, 1e-13};
        const double t = 0.2, y = 1.1, h = 1e-4;
        CHECK(theta_kernel(k, t, 0.0, y).value == 0.0);
        auto th = [&](double x) { return theta_kernel(k, t, x, y).value; };
        const double th_x0 = (-3 * th(0.0) + 4 * th(h) - th(2 * h)) / (2 * h);
        CHECK(std::abs(th_x0) <= 1e-4);
        const double th_xL = (3 * th(k.L) - 4 * th(k.L - h) + th(k.L - 2 * h)) / (2 * h);
        CHECK(std::abs(th_xL) <= 1e-4);
        CHECK(std::abs(b_kernel(k, t, 0.0).value - 1.0) <= 1e-6);
        const double b_direct =
            1.0 - simpson([&](double yy) { return theta_kernel(k, t, 1.3, yy).value; }, 0.0, k.L, 300);
        CHECK(b_kernel(k, t, 1.3).value == doctest::Approx(b_direct).epsilon(1e-7).scale(1.0));

        // The literal integral satisfies the PDE up to a boundary defect
        // -phi(t,0,y) N_zz(t,0,y); the test pins that defect down exactly.
        for (double x : {0.8, 1.5, 2.4}) {
            auto F = [&](double a, double b) { return theta_kernel(k, a, b, y).value; };
            const double r = residual(F, lam, t, x);
            const double phi0 = std::exp(lam * (0.0 - y) / 2 - lam * lam * t / 4);
            const double defect = -phi0 * neumann_t_at_zero(k.L, t, y);
            CHECK(r == doctest::Approx(defect).epsilon(1e-3).scale(1.0));
        }
    }
}

TEST_CASE("theta antiderivative reproduces delta for zero drift") {
    KernelSpec k{0.0, 3.0, 8, 1e-13};
    const double t = 0.15, h = 1e-3;
    for (double x : {0.7, 1.6}) {
        for (double y : {0.9, 2.0}) {
            auto F = [&](double xx) {
                return simpson([&](double xi) { return theta_kernel(k, t, xx, xi).value; }, y, k.L, 400);
            };
            const double theta_tilde = (F(x + h) - F(x - h)) / (2 * h);
            CHECK(std::abs(theta_tilde - delta_kernel(k, t, x, y).value) <= 1e-5);
        }
    }
}

TEST_CASE("norm report: sub-probability, unit range, inverse square-root scaling") {
    const std::vector<double> tg = {1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0};
    auto rows0 = kernel_norm_report({0.0, 10.0, 8, 1e-12}, tg, 5.0, 4001);
    for (const auto& r : rows0) CHECK(r.delta_l1 <= 1.0 + 1e-6);

    auto rows = kernel_norm_report({1.0, 4.0, 8, 1e-12}, tg, -1.0, 4001);
    double lo = 1e300, hi = 0;
    for (const auto& r : rows) {
        CHECK(r.j_min >= 0.0);
        CHECK(r.j_sup <= 1.0);
        CHECK(std::isfinite(r.j_x_l1));
        CHECK(std::isfinite(r.delta_tilde_l1));
        lo = std::min(lo, r.delta_x_l1_sqrt_t);
        hi = std::max(hi, r.delta_x_l1_sqrt_t);
    }
    CHECK(hi / lo < 3.0);
}

TEST_CASE("memoized kernels are identical under concurrent access") {
    KernelCache cache({1.0, 4.0, 8, 1e-12});
    std::vector<double> serial;
    for (int i = 0; i < 200; ++i) serial.push_back(cache.delta(0.1 + 0.001 * i, 1.0 + 0.01 * i, 2.0));
    KernelCache fresh({1.0, 4.0, 8, 1e-12});
    std::vector<double> par(200);
    std::vector<std::thread> pool;
    for (int w = 0; w < 4; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < 200; i += 4) par[i] = fresh.delta(0.1 + 0.001 * i, 1.0 + 0.01 * i, 2.0);
        });
    }
    for (auto& th : pool) th.join();
    for (int i = 0; i < 200; ++i) CHECK(par[i] == serial[i]);
    CHECK(fresh.size() == 200);
    CHECK(cache.j0(0.5, 1.0) == j0_kernel(cache.spec(), 0.5, 1.0).value);
}

TEST_CASE("lattice form of delta matches pointwise evaluation") {
    for (double lam : {-1.5, 0.0, 2.0}) {
        KernelSpec spec{lam, 6.0};
        for (double t : {0.02, 0.7}) {
            const int n = 61;
            DeltaLattice lat(spec, t, n);
            const double h = spec.L / (n - 1);
            double worst = 0.0;
            for (int i = 0; i < n; i += 3)
                for (int j = 1; j < n - 1; j += 2)
                    worst = std::max(worst, std::abs(lat(i, j) - delta_kernel(spec, t, i * h, j * h).value));
            CAPTURE(lam);
            CAPTURE(t);
            CHECK(worst < 1e-12);
            CHECK(lat.tail_bound() < 1e-9);
        }
    }
}
