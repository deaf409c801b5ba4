#pragma once

// Dense double-precision inner loops used by the model fitters and the
// decoder: reductions for least-squares moments and emission statistics,
// and the per-timestep Gaussian log-density map that dominates decoding.
//
// Each kernel has a scalar reference implementation and, on x86-64 with
// AVX2, a vectorized variant. The variant is picked once at startup from
// CPU capabilities; MOBHSMM_SIMD=scalar in the environment forces the
// reference path. Variants are equivalence-tested against each other.

#include <cstddef>
#include <vector>

namespace mobhsmm::kernels {

struct Ops {
    const char* name;
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum of (x[i] - center)^2
    double (*sq_dev_sum)(const double* x, std::size_t n, double center);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = log N(x[i]; mu, sigma)
    void (*gaussian_loglik)(const double* x, std::size_t n, double mu, double sigma,
                            double* out);
};

// Scalar reference kernels; always available.
const Ops& scalar_ops();

// AVX2 kernels, or nullptr when the build or the CPU lacks support.
const Ops* avx2_ops();

// All variants usable on this machine (scalar first).
const std::vector<const Ops*>& available_ops();

// The selected variant. Chosen on first use; override with force_ops().
const Ops& active_ops();

// Test hook: force a specific variant by name ("scalar", "avx2").
// Returns false if the variant is not available.
bool force_ops(const char* name);

// Convenience forwarders through the active variant.
inline double sum(const double* x, std::size_t n) { return active_ops().sum(x, n); }
inline double dot(const double* x, const double* y, std::size_t n) {
    return active_ops().dot(x, y, n);
}
inline double sq_dev_sum(const double* x, std::size_t n, double center) {
    return active_ops().sq_dev_sum(x, n, center);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
    active_ops().axpy(a, x, y, n);
}
inline void gaussian_loglik(const double* x, std::size_t n, double mu, double sigma,
                            double* out) {
    active_ops().gaussian_loglik(x, n, mu, sigma, out);
}

} // namespace mobhsmm::kernels
