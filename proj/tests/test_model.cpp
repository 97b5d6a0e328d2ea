#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "vvtri/model.hpp"

using namespace vv;

TEST_CASE("diagonal system has the canonical base") {
    const auto sys = builtin_system("diag");
    for (State u : {State{0, 0}, State{0.3, -0.7}}) {
        const auto s = eigensystem(sys, u);
        CHECK(s.r1.u1 == 1.0);
        CHECK(s.r1.u2 == 0.0);
        CHECK(s.r2.u2 == 1.0);
        CHECK(s.ell2.u1 == 0.0);
        CHECK(s.ell2.u2 == 1.0);
    }
}

TEST_CASE("constant coupling gives r1 = (1, g/(lambda1 - lambda2))") {
    const auto s = eigensystem(builtin_system("const-coupled"), {0, 0});
    CHECK(s.r1.u2 == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("first eigenvector agrees with a dense eigensolver") {
    AffineCoefficients k;
    k.l1_0 = -1; k.l1_1 = 0.1;
    k.l2_0 = 1; k.l2_2 = 0.1;
    k.g_1 = 0.2;
    const auto sys = affine_system("affine", k, {0, 0}, 0.5, 0.5);
    const State u{0.1, 0.2};
    const auto s = eigensystem(sys, u);

    const Mat2 A = sys.A(u);
    Eigen::Matrix2d M;
    M << A.a11, A.a12, A.a21, A.a22;
    Eigen::EigenSolver<Eigen::Matrix2d> es(M);
    int idx = es.eigenvalues()(0).real() < es.eigenvalues()(1).real() ? 0 : 1;
    Eigen::Vector2d v = es.eigenvectors().col(idx).real();
    v /= v(0);
    CHECK(std::abs(es.eigenvalues()(idx).real() - s.lambda1) < 1e-12);
    CHECK(std::abs(v(1) - s.r1.u2) < 1e-10);
}

TEST_CASE("hyperbolicity certificate") {
    auto diag = builtin_system("diag");
    auto cert = certify_hyperbolic(diag, 5);
    CHECK(cert.ok);
    CHECK(cert.c_measured == doctest::Approx(1.0));

    AffineCoefficients slow;
    slow.l1_0 = -0.1;
    CHECK_FALSE(certify_hyperbolic(affine_system("slow", slow, {0, 0}, 0.5, 0.5), 4).ok);

    AffineCoefficients k;
    k.l1_0 = -1; k.l1_1 = 1;
    auto cert2 = certify_hyperbolic(affine_system("gnl", k, {0, 0}, 0.6, 0.3), 7);
    CHECK(cert2.ok);
    CHECK(cert2.c_measured == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(cert2.worst.u1 == doctest::Approx(0.6));
}

TEST_CASE("eigensystem refuses states outside K and collapsing spectra") {
    auto sys = builtin_system("burgers-triangular");
    try {
        eigensystem(sys, {0.6, 0});
        FAIL("expected OutOfNeighborhood");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfNeighborhood);
    }
    AffineCoefficients k;
    k.l1_0 = -0.2; k.l2_0 = 0.2;
    try {
        eigensystem(affine_system("close", k, {0, 0}, 1.0, 0.5), {0, 0});
        FAIL("expected DegenerateSpectrum");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateSpectrum);
    }
}

TEST_CASE("spectral identities hold on random states of every built-in system") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (const auto& name : builtin_names()) {
        const auto sys = builtin_system(name);
        double lip = 0.0;
        for (int n = 0; n < 200; ++n) {
            const State u{sys.u_star.u1 + 0.99 * sys.delta_box * unit(rng),
                          sys.u_star.u2 + 0.99 * sys.delta_box * unit(rng)};
            const auto s = eigensystem(sys, u);
            const Mat2 A = sys.A(u);
            CAPTURE(name);
            CHECK(std::abs((A.a11 - s.lambda1) * (A.a22 - s.lambda1) - A.a12 * A.a21) < 1e-10);
            CHECK(std::abs((A.a11 - s.lambda2) * (A.a22 - s.lambda2) - A.a12 * A.a21) < 1e-10);
            CHECK(norm_inf(A * s.r1 - s.lambda1 * s.r1) < 1e-12 * (1 + std::abs(s.lambda1)));
            CHECK(std::abs(dot(s.ell1, s.r1) - 1) < 1e-10);
            CHECK(std::abs(dot(s.ell1, s.r2)) < 1e-10);
            CHECK(std::abs(dot(s.ell2, s.r1)) < 1e-10);
            CHECK(std::abs(dot(s.ell2, s.r2) - 1) < 1e-10);

            const double h = 1e-3 * sys.delta_box;
            const State v = u + State{h * unit(rng), h * unit(rng)};
            if (sys.in_box(v)) lip = std::max(lip, norm_inf(spectral(sys, v).r1 - s.r1) / norm_inf(v - u));
        }
        CHECK(std::isfinite(lip));
    }
}

TEST_CASE("finite-difference gradients match analytic ones") {
    auto sys = builtin_system("burgers-triangular");
    auto fd = sys;
    fd.dlambda1 = nullptr;
    fd.dlambda2 = nullptr;
    fd.dg = nullptr;
    const State u{0.1, -0.2};
    CHECK(norm_inf(fd.grad_lambda1(u) - sys.grad_lambda1(u)) < 1e-8);
    CHECK(norm_inf(fd.grad_lambda2(u) - sys.grad_lambda2(u)) < 1e-8);
    CHECK(norm_inf(fd.grad_g(u) - sys.grad_g(u)) < 1e-8);
}
