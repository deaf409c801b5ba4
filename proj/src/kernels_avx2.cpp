// AVX2 variants of the dense kernels. This translation unit is compiled with
// -mavx2 -mfma and only added to the build on x86-64; callers must check CPU
// support through the dispatch table before entering.

#include "mobhsmm/kernels.hpp"

#if defined(MOBHSMM_HAVE_AVX2)

#include <cmath>
#include <immintrin.h>

namespace mobhsmm::kernels {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sq_dev_sum_avx2(const double* x, std::size_t n, double center) {
    const __m256d c = _mm256_set1_pd(center);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), c);
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        double d = x[i] - center;
        acc += d * d;
    }
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yi = _mm256_loadu_pd(y + i);
        yi = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yi);
        _mm256_storeu_pd(y + i, yi);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void gaussian_loglik_avx2(const double* x, std::size_t n, double mu, double sigma,
                          double* out) {
    const double inv_sigma = 1.0 / sigma;
    const double c = std::log(sigma) + kHalfLog2Pi;
    const __m256d muv = _mm256_set1_pd(mu);
    const __m256d isv = _mm256_set1_pd(inv_sigma);
    const __m256d cv = _mm256_set1_pd(c);
    const __m256d half = _mm256_set1_pd(0.5);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d z = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), muv), isv);
        __m256d t = _mm256_fmadd_pd(_mm256_mul_pd(z, z), half, cv); // 0.5*z^2 + c
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_setzero_pd(), t));
    }
    for (; i < n; ++i) {
        double z = (x[i] - mu) * inv_sigma;
        out[i] = -0.5 * z * z - c;
    }
}

} // namespace

const Ops* avx2_ops_impl() {
    static const Ops ops{"avx2", sum_avx2,  dot_avx2,
                         sq_dev_sum_avx2,   axpy_avx2,
                         gaussian_loglik_avx2};
    return &ops;
}

} // namespace mobhsmm::kernels

#endif // MOBHSMM_HAVE_AVX2
