#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mobhsmm/kernels.hpp"
#include "mobhsmm/rng.hpp"

using namespace mobhsmm;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (rng.uniform() * 2.0 - 1.0);
    return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 1023};

} // namespace

TEST_CASE("scalar ops are always available and selectable") {
    auto variants = kernels::available_ops();
    REQUIRE(!variants.empty());
    bool has_scalar = false;
    for (const auto* ops : variants)
        if (std::strcmp(ops->name, "scalar") == 0) has_scalar = true;
    CHECK(has_scalar);
    CHECK(kernels::force_ops("scalar"));
    CHECK(std::strcmp(kernels::active_ops().name, "scalar") == 0);
    CHECK(!kernels::force_ops("nonsense"));
    kernels::force_ops(kernels::available_ops().back()->name);
}

TEST_CASE("every variant matches the scalar reference") {
    const kernels::Ops* scalar = &kernels::scalar_ops();
    for (const kernels::Ops* ops : kernels::available_ops()) {
        CAPTURE(ops->name);
        Rng rng(mix_seed(0x5eed, std::hash<std::string>{}(ops->name)));
        for (std::size_t n : kSizes) {
            auto x = random_vector(rng, n, 3.0);
            auto y = random_vector(rng, n, 2.0);

            CHECK(ops->sum(x.data(), n) == doctest::Approx(scalar->sum(x.data(), n)).epsilon(1e-12));
            CHECK(ops->dot(x.data(), y.data(), n) ==
                  doctest::Approx(scalar->dot(x.data(), y.data(), n)).epsilon(1e-12));
            CHECK(ops->sq_dev_sum(x.data(), n, 0.25) ==
                  doctest::Approx(scalar->sq_dev_sum(x.data(), n, 0.25)).epsilon(1e-12));

            auto y1 = y, y2 = y;
            ops->axpy(1.75, x.data(), y1.data(), n);
            scalar->axpy(1.75, x.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));

            std::vector<double> out1(n), out2(n);
            ops->gaussian_loglik(x.data(), n, 0.3, 0.7, out1.data());
            scalar->gaussian_loglik(x.data(), n, 0.3, 0.7, out2.data());
            for (std::size_t i = 0; i < n; ++i)
                CHECK(out1[i] == doctest::Approx(out2[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("gaussian_loglik matches the closed form") {
    const double x = 1.3, mu = 0.4, sigma = 0.6;
    double out = 0.0;
    kernels::scalar_ops().gaussian_loglik(&x, 1, mu, sigma, &out);
    double z = (x - mu) / sigma;
    double expected = -0.5 * z * z - std::log(sigma) - 0.5 * std::log(8.0 * std::atan(1.0));
    CHECK(out == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("kernel edge cases") {
    const kernels::Ops& ops = kernels::active_ops();
    CHECK(ops.sum(nullptr, 0) == 0.0);
    CHECK(ops.dot(nullptr, nullptr, 0) == 0.0);
    double one = 5.0;
    CHECK(ops.sum(&one, 1) == 5.0);
    CHECK(ops.sq_dev_sum(&one, 1, 5.0) == 0.0);
}
