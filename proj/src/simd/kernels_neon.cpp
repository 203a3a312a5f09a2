#include "lora/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <cmath>

namespace lora::simd::detail {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t a0 = vdupq_n_f64(0.0);
    float64x2_t a1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 = vfmaq_f64(a0, vld1q_f64(x + i), vld1q_f64(y + i));
        a1 = vfmaq_f64(a1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(a0, a1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_squares_neon(const double* x, std::size_t n) {
    float64x2_t a0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        a0 = vfmaq_f64(a0, v, v);
    }
    double acc = vaddvq_f64(a0);
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double max_abs_neon(const double* x, std::size_t n) {
    float64x2_t m = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vabsq_f64(vld1q_f64(x + i)));
    double out = vmaxvq_f64(m);
    for (; i < n; ++i) {
        const double v = std::fabs(x[i]);
        if (v > out) out = v;
    }
    return out;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

const KernelTable table{Isa::neon, dot_neon, sum_squares_neon, max_abs_neon, axpy_neon};

}  // namespace

const KernelTable* neon_table() { return &table; }

}  // namespace lora::simd::detail

#else

namespace lora::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace lora::simd::detail

#endif
