#pragma once

#include <cstddef>

namespace finflow::kern {

// Runtime-dispatched arithmetic kernels. Every entry has a scalar reference
// implementation and (on x86-64 with AVX2+FMA) a vector implementation that
// is bit-identical to the reference: elementwise kernels share the same
// per-lane fma sequence, reductions share the same 4-accumulator strided
// order, and transcendentals share one polynomial. Equivalence is enforced
// by tests/test_core.cpp.
enum class Pad { Zero, Periodic };

struct Ops {
    const char* name;

    // elementwise, out may alias a
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*div)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(double s, const double* a, double* out, std::size_t n);      // out = s*a
    void (*axpy)(double s, const double* a, double* y, std::size_t n);         // y += s*a
    void (*mul_acc)(const double* a, const double* b, double* y, std::size_t n); // y += a*b
    void (*vexp)(const double* a, double* out, std::size_t n);
    void (*vsigmoid)(const double* a, double* out, std::size_t n);
    void (*vsqrt)(const double* a, double* out, std::size_t n);

    // reductions (fixed order: 4 strided accumulators, then serial tail)
    double (*sum)(const double* a, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*max_abs)(const double* a, std::size_t n);
    bool (*all_finite)(const double* a, std::size_t n);

    // 3x3 correlation on one plane: out(y,x) {=,+=} sum_{dy,dx} in(y+dy-1, x+dx-1) * k(dy,dx)
    void (*corr3x3)(const double* in, int h, int w, const double* k9, double* out,
                    Pad pad, bool accumulate);
    // weight gradient: gk9[tap] += sum_{y,x} gout(y,x) * in_pad(y+dy-1, x+dx-1)
    void (*corr3x3_wgrad)(const double* in, const double* gout, int h, int w,
                          Pad pad, double* gk9);
};

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops(); // only valid to call if avx2_available()
bool avx2_available();
#endif

// Active table: AVX2 when the CPU supports it, else scalar.
// FINFLOW_KERNEL=scalar|avx2 overrides (tests, benchmarking).
const Ops& ops();

// scalar transcendentals shared by both backends (same fma sequence per lane)
double fexp(double x);
double fsigmoid(double x);

} // namespace finflow::kern
