#include "finflow/core/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

// Scalar reference kernels. These define the numerical semantics the AVX2
// backend must reproduce bit-for-bit: elementwise kernels are straight
// per-element chains (fma where the vector code uses fma), reductions use
// four strided accumulators merged as (a0+a1)+(a2+a3) plus a serial tail,
// and corr3x3 reads from padded scratch rows so edge and interior pixels
// share one op sequence.

namespace finflow::kern {

namespace {

constexpr double kLog2E = 1.4426950408889634074;   // log2(e)
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;

// exp(r) on |r| <= ln2/2 as a degree-14 Horner series; coefficients are
// 1/j! rounded to double. Max truncation term ~1e-19 relative.
constexpr double kExpC[15] = {
    1.0,
    1.0,
    5.0000000000000000e-01,
    1.6666666666666666e-01,
    4.1666666666666664e-02,
    8.3333333333333332e-03,
    1.3888888888888889e-03,
    1.9841269841269841e-04,
    2.4801587301587302e-05,
    2.7557319223985893e-06,
    2.7557319223985888e-07,
    2.5052108385441720e-08,
    2.0876756987868099e-09,
    1.6059043836821613e-10,
    1.1470745597729725e-11,
};

inline double exp_core(double x) {
    double k = std::nearbyint(x * kLog2E);
    double r = std::fma(k, -kLn2Hi, x);
    r = std::fma(k, -kLn2Lo, r);
    double p = kExpC[14];
    for (int j = 13; j >= 0; --j) p = std::fma(p, r, kExpC[j]);
    std::int64_t bits = (std::int64_t(k) + 1023) << 52;
    double two_k;
    std::memcpy(&two_k, &bits, sizeof(double));
    return p * two_k;
}

} // namespace

double fexp(double x) {
    if (std::isnan(x)) return x;
    if (x > 709.0) return std::numeric_limits<double>::infinity();
    if (x < -708.0) return 0.0; // flush-to-zero below the subnormal range
    return exp_core(x);
}

double fsigmoid(double x) {
    double e = fexp(x < 0.0 ? x : -x); // exp(-|x|), nan passes through
    double s = e / (1.0 + e);
    return x >= 0.0 ? 1.0 - s : s;
}

namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void s_div(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}
void s_scale(double s, const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}
void s_axpy(double s, const double* a, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(s, a[i], y[i]);
}
void s_mul_acc(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a[i], b[i], y[i]);
}
void s_vexp(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fexp(a[i]);
}
void s_vsigmoid(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fsigmoid(a[i]);
}
void s_vsqrt(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(a[i]);
}

double s_sum(const double* a, std::size_t n) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += a[i];
        a1 += a[i + 1];
        a2 += a[i + 2];
        a3 += a[i + 3];
    }
    double t = (a0 + a1) + (a2 + a3);
    for (; i < n; ++i) t += a[i];
    return t;
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 = std::fma(a[i], b[i], a0);
        a1 = std::fma(a[i + 1], b[i + 1], a1);
        a2 = std::fma(a[i + 2], b[i + 2], a2);
        a3 = std::fma(a[i + 3], b[i + 3], a3);
    }
    double t = (a0 + a1) + (a2 + a3);
    for (; i < n; ++i) t = std::fma(a[i], b[i], t);
    return t;
}

double s_max_abs(const double* a, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

bool s_all_finite(const double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

// builds a padded copy of input row `y` (may be out of range) into dst[w+2]
void fetch_row(const double* in, int h, int w, int y, Pad pad, double* dst) {
    if (pad == Pad::Periodic) y = (y % h + h) % h;
    if (y < 0 || y >= h) {
        std::memset(dst, 0, sizeof(double) * std::size_t(w + 2));
        return;
    }
    const double* row = in + std::size_t(y) * w;
    std::memcpy(dst + 1, row, sizeof(double) * std::size_t(w));
    if (pad == Pad::Periodic) {
        dst[0] = row[w - 1];
        dst[w + 1] = row[0];
    } else {
        dst[0] = 0.0;
        dst[w + 1] = 0.0;
    }
}

void s_corr3x3(const double* in, int h, int w, const double* k, double* out,
               Pad pad, bool accumulate) {
    std::vector<double> scratch(3 * std::size_t(w + 2));
    double* rows[3] = {scratch.data(), scratch.data() + (w + 2), scratch.data() + 2 * std::size_t(w + 2)};
    fetch_row(in, h, w, -1, pad, rows[0]);
    fetch_row(in, h, w, 0, pad, rows[1]);
    fetch_row(in, h, w, 1, pad, rows[2]);
    for (int y = 0; y < h; ++y) {
        const double *r0 = rows[0], *r1 = rows[1], *r2 = rows[2];
        double* o = out + std::size_t(y) * w;
        for (int i = 0; i < w; ++i) {
            double s = accumulate ? o[i] : 0.0;
            s = std::fma(k[0], r0[i], s);
            s = std::fma(k[1], r0[i + 1], s);
            s = std::fma(k[2], r0[i + 2], s);
            s = std::fma(k[3], r1[i], s);
            s = std::fma(k[4], r1[i + 1], s);
            s = std::fma(k[5], r1[i + 2], s);
            s = std::fma(k[6], r2[i], s);
            s = std::fma(k[7], r2[i + 1], s);
            s = std::fma(k[8], r2[i + 2], s);
            o[i] = s;
        }
        double* t = rows[0];
        rows[0] = rows[1];
        rows[1] = rows[2];
        rows[2] = t;
        fetch_row(in, h, w, y + 2, pad, rows[2]);
    }
}

// 4-accumulator row dot, shared semantics with s_dot
double row_dot(const double* a, const double* b, std::size_t n) {
    return s_dot(a, b, n);
}

void s_corr3x3_wgrad(const double* in, const double* gout, int h, int w,
                     Pad pad, double* gk) {
    std::vector<double> scratch(3 * std::size_t(w + 2));
    double* rows[3] = {scratch.data(), scratch.data() + (w + 2), scratch.data() + 2 * std::size_t(w + 2)};
    fetch_row(in, h, w, -1, pad, rows[0]);
    fetch_row(in, h, w, 0, pad, rows[1]);
    fetch_row(in, h, w, 1, pad, rows[2]);
    for (int y = 0; y < h; ++y) {
        const double* g = gout + std::size_t(y) * w;
        for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx)
                gk[dy * 3 + dx] += row_dot(g, rows[dy] + dx, std::size_t(w));
        double* t = rows[0];
        rows[0] = rows[1];
        rows[1] = rows[2];
        rows[2] = t;
        fetch_row(in, h, w, y + 2, pad, rows[2]);
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        s_add, s_sub, s_mul, s_div, s_scale, s_axpy, s_mul_acc,
        s_vexp, s_vsigmoid, s_vsqrt,
        s_sum, s_dot, s_max_abs, s_all_finite,
        s_corr3x3, s_corr3x3_wgrad,
    };
    return ops;
}

} // namespace finflow::kern
