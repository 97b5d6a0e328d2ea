#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "vvtri/errors.hpp"

namespace vv {

// Green kernels of z_t + lambda z_x - z_xx = 0 on (0, L), built from the heat
// kernel by the method of images. The image series is summed shell by shell
// (m = +k and m = -k together) until the first omitted shell certifies the
// tail below tail_tol; m_max is a hard cap.
struct KernelSpec {
    double lambda = 0.0;
    double L = 1.0;
    int m_max = 8;
    double tail_tol = 1e-12;
};

struct KernelEval {
    double value = 0.0;
    double tail_bound = 0.0;
};

struct KernelDerivs {
    double value = 0.0;
    double dx = 0.0;
    double dxx = 0.0;
    double tail_bound = 0.0;
};

enum class Side { Left, Right };

double heat(double t, double x);

KernelEval delta_kernel(const KernelSpec& spec, double t, double x, double y);
KernelEval delta_kernel_x(const KernelSpec& spec, double t, double x, double y);

// Boundary kernels: J0 has datum 1 at x = 0, JL has datum 1 at x = L, both
// with zero initial datum. Refuse |lambda| < 1e-8.
KernelEval j0_kernel(const KernelSpec& spec, double t, double x);
KernelEval jL_kernel(const KernelSpec& spec, double t, double x);
KernelDerivs j_kernel_derivs(const KernelSpec& spec, Side side, double t, double x);

// delta_tilde(t,x,y) = int_y^L d/dx delta_kernel(t,x,z) dz, summed in closed form.
KernelEval delta_tilde(const KernelSpec& spec, double t, double x, double y);
KernelEval delta_tilde_x(const KernelSpec& spec, double t, double x, double y);

// Theta(t,x,y) = int_0^x phi(t,z,y) sum_m [G_z(z+2mL-y) + G_z(z+2mL+y)] dz by
// adaptive Gauss-Kronrod; b_kernel = 1 - int_0^L Theta dy.
KernelEval theta_kernel(const KernelSpec& spec, double t, double x, double y);
KernelEval b_kernel(const KernelSpec& spec, double t, double x);

// Delta at one time on the uniform lattice x_i = i*L/(n-1). Since
// Delta(t,x,y) = P(x-y) - exp(-lambda*y) P(x+y) with a single image sum P, the
// whole n-by-n matrix is served from one table of length 3n.
class DeltaLattice {
public:
    DeltaLattice(const KernelSpec& spec, double t, int n);
    double operator()(int i, int j) const { return p_[i - j + off_] - e_[j] * p_[i + j + off_]; }
    int size() const { return n_; }
    double tail_bound() const { return tail_; }

private:
    int n_ = 0;
    int off_ = 0;
    std::vector<double> p_, e_;
    double tail_ = 0.0;
};

struct KernelNormRow {
    double t = 0;
    double delta_l1 = 0;            // ||Delta(t,.,y)||_1
    double delta_x_l1_sqrt_t = 0;   // ||Delta_x(t,.,y)||_1 * sqrt(t)
    double j_sup = 0;               // max over both J kernels
    double j_min = 0;
    double j_x_l1 = 0;              // max over both J kernels
    double j_xx_l1_sqrt_t = 0;
    double delta_tilde_l1 = 0;
    double delta_tilde_x_l1_sqrt_t = 0;
};

// Norms over x in (0, L) by composite trapezoid on nx points; y defaults to L/2.
std::vector<KernelNormRow> kernel_norm_report(const KernelSpec& spec, const std::vector<double>& t_grid,
                                              double y = -1.0, int nx = 4001);

// Memoizing front end. Keys are (t, x, y) rounded to 1e-12; a mutex guards the
// table so concurrent callers see the same values as a serial caller.
class KernelCache {
public:
    explicit KernelCache(KernelSpec spec) : spec_(spec) {}
    const KernelSpec& spec() const { return spec_; }

    double delta(double t, double x, double y);
    double j0(double t, double x);
    double jL(double t, double x);
    std::size_t size() const;

private:
    struct Key {
        int kind;
        std::int64_t t, x, y;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const;
    };
    template <class F>
    double lookup(int kind, double t, double x, double y, F&& compute);

    KernelSpec spec_;
    mutable std::mutex mutex_;
    std::unordered_map<Key, double, KeyHash> table_;
};

}  // namespace vv
