#if defined(__x86_64__) || defined(_M_X64)

#include "finflow/core/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <vector>

// AVX2+FMA backend. Compiled with -mavx2 -mfma for this translation unit
// only; kernels_select.cpp gates dispatch on cpuid. Each kernel reproduces
// the scalar reference bit-for-bit: identical per-lane fma chains, identical
// strided reduction order, one shared exp polynomial. test_core.cpp asserts
// the equivalence on random and adversarial inputs.

namespace finflow::kern {

namespace {

constexpr double kLog2E = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;

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

inline __m256d exp_core(__m256d x) {
    __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fmadd_pd(k, _mm256_set1_pd(-kLn2Hi), x);
    r = _mm256_fmadd_pd(k, _mm256_set1_pd(-kLn2Lo), r);
    __m256d p = _mm256_set1_pd(kExpC[14]);
    for (int j = 13; j >= 0; --j) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpC[j]));
    __m128i ki = _mm256_cvtpd_epi32(k);
    __m256i ki64 = _mm256_cvtepi32_epi64(ki);
    __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d exp4(__m256d x) {
    __m256d r = exp_core(x);
    __m256d big = _mm256_cmp_pd(x, _mm256_set1_pd(709.0), _CMP_GT_OQ);
    __m256d small = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_LT_OQ);
    __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
    r = _mm256_blendv_pd(r, _mm256_set1_pd(std::numeric_limits<double>::infinity()), big);
    r = _mm256_blendv_pd(r, _mm256_setzero_pd(), small);
    r = _mm256_blendv_pd(r, x, nan);
    return r;
}

inline __m256d sigmoid4(__m256d x) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d ax = _mm256_andnot_pd(sign_mask, x);
    __m256d e = exp4(_mm256_sub_pd(_mm256_setzero_pd(), ax));
    __m256d one = _mm256_set1_pd(1.0);
    __m256d s = _mm256_div_pd(e, _mm256_add_pd(one, e));
    __m256d ge = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GE_OQ);
    return _mm256_blendv_pd(s, _mm256_sub_pd(one, s), ge);
}

void v_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void v_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void v_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void v_div(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}
void v_scale(double s, const double* a, double* out, std::size_t n) {
    __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = s * a[i];
}
void v_axpy(double s, const double* a, double* y, std::size_t n) {
    __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, _mm256_loadu_pd(a + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(s, a[i], y[i]);
}
void v_mul_acc(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(a[i], b[i], y[i]);
}
void v_vexp(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = fexp(a[i]);
}
void v_vsigmoid(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, sigmoid4(_mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = fsigmoid(a[i]);
}
void v_vsqrt(const double* a, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_sqrt_pd(_mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = std::sqrt(a[i]);
}

// lane j of acc equals strided scalar accumulator aj; merged (a0+a1)+(a2+a3)
inline double hsum_strided(__m256d acc) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double t = hsum_strided(acc);
    for (; i < n; ++i) t += a[i];
    return t;
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double t = hsum_strided(acc);
    for (; i < n; ++i) t = std::fma(a[i], b[i], t);
    return t;
}

double v_max_abs(const double* a, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        m = _mm256_max_pd(m, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(a + i)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, m);
    double t = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    for (; i < n; ++i) t = std::max(t, std::fabs(a[i]));
    return t;
}

bool v_all_finite(const double* a, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(a + i));
        // |x| < inf fails for inf and nan alike
        __m256d ok = _mm256_cmp_pd(x, inf, _CMP_LT_OQ);
        if (_mm256_movemask_pd(ok) != 0xF) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

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

void v_corr3x3(const double* in, int h, int w, const double* k, double* out,
               Pad pad, bool accumulate) {
    std::vector<double> scratch(3 * std::size_t(w + 2));
    double* rows[3] = {scratch.data(), scratch.data() + (w + 2), scratch.data() + 2 * std::size_t(w + 2)};
    fetch_row(in, h, w, -1, pad, rows[0]);
    fetch_row(in, h, w, 0, pad, rows[1]);
    fetch_row(in, h, w, 1, pad, rows[2]);
    __m256d vk[9];
    for (int t = 0; t < 9; ++t) vk[t] = _mm256_set1_pd(k[t]);
    for (int y = 0; y < h; ++y) {
        const double *r0 = rows[0], *r1 = rows[1], *r2 = rows[2];
        double* o = out + std::size_t(y) * w;
        int i = 0;
        for (; i + 4 <= w; i += 4) {
            __m256d s = accumulate ? _mm256_loadu_pd(o + i) : _mm256_setzero_pd();
            s = _mm256_fmadd_pd(vk[0], _mm256_loadu_pd(r0 + i), s);
            s = _mm256_fmadd_pd(vk[1], _mm256_loadu_pd(r0 + i + 1), s);
            s = _mm256_fmadd_pd(vk[2], _mm256_loadu_pd(r0 + i + 2), s);
            s = _mm256_fmadd_pd(vk[3], _mm256_loadu_pd(r1 + i), s);
            s = _mm256_fmadd_pd(vk[4], _mm256_loadu_pd(r1 + i + 1), s);
            s = _mm256_fmadd_pd(vk[5], _mm256_loadu_pd(r1 + i + 2), s);
            s = _mm256_fmadd_pd(vk[6], _mm256_loadu_pd(r2 + i), s);
            s = _mm256_fmadd_pd(vk[7], _mm256_loadu_pd(r2 + i + 1), s);
            s = _mm256_fmadd_pd(vk[8], _mm256_loadu_pd(r2 + i + 2), s);
            _mm256_storeu_pd(o + i, s);
        }
        for (; i < w; ++i) {
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

void v_corr3x3_wgrad(const double* in, const double* gout, int h, int w,
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
                gk[dy * 3 + dx] += v_dot(g, rows[dy] + dx, std::size_t(w));
        double* t = rows[0];
        rows[0] = rows[1];
        rows[1] = rows[2];
        rows[2] = t;
        fetch_row(in, h, w, y + 2, pad, rows[2]);
    }
}

} // namespace

const Ops& avx2_ops() {
    static const Ops ops = {
        "avx2",
        v_add, v_sub, v_mul, v_div, v_scale, v_axpy, v_mul_acc,
        v_vexp, v_vsigmoid, v_vsqrt,
        v_sum, v_dot, v_max_abs, v_all_finite,
        v_corr3x3, v_corr3x3_wgrad,
    };
    return ops;
}

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

} // namespace finflow::kern

#endif // x86_64
