#include "mobhsmm/kernels.hpp"

#include <cmath>

// Reference kernels. Plain sequential loops; these define the semantics the
// vectorized variants are tested against.

namespace mobhsmm::kernels {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727; // 0.5 * ln(2*pi)

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sq_dev_sum_scalar(const double* x, std::size_t n, double center) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - center;
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gaussian_loglik_scalar(const double* x, std::size_t n, double mu, double sigma,
                            double* out) {
    const double inv_sigma = 1.0 / sigma;
    const double c = std::log(sigma) + kHalfLog2Pi;
    for (std::size_t i = 0; i < n; ++i) {
        double z = (x[i] - mu) * inv_sigma;
        out[i] = -0.5 * z * z - c;
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", sum_scalar,  dot_scalar,
                         sq_dev_sum_scalar,     axpy_scalar,
                         gaussian_loglik_scalar};
    return ops;
}

} // namespace mobhsmm::kernels
