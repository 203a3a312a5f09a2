#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lora/simd/kernels.hpp"

using namespace lora::simd;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(0.0, 3.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

}  // namespace

TEST_CASE("scalar kernels match hand-computed values") {
    const auto& k = kernels_for(Isa::scalar);
    const double x[] = {1.0, -2.0, 3.0};
    const double y[] = {4.0, 5.0, -6.0};
    CHECK(k.dot(x, y, 3) == doctest::Approx(-24.0));
    CHECK(k.sum_squares(x, 3) == doctest::Approx(14.0));
    CHECK(k.max_abs(y, 3) == 6.0);
    CHECK(k.max_abs(x, 0) == 0.0);
    double z[] = {1.0, 1.0, 1.0};
    k.axpy(2.0, x, z, 3);
    CHECK(z[0] == 3.0);
    CHECK(z[1] == -3.0);
    CHECK(z[2] == 7.0);
}

TEST_CASE("every available variant agrees with the scalar reference") {
    const auto& ref = kernels_for(Isa::scalar);
    for (Isa isa : available_isas()) {
        CAPTURE(isa_name(isa));
        const auto& k = kernels_for(isa);
        CHECK(k.isa == isa);
        // Lengths around the vector widths and unroll factors, including tails.
        for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 1001u}) {
            CAPTURE(n);
            const auto x = random_vector(n, 10 + n);
            const auto y = random_vector(n, 20 + n);
            const double scale = 1.0 + ref.sum_squares(x.data(), n);
            CHECK(std::abs(k.dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <= 1e-12 * scale * 10);
            CHECK(std::abs(k.sum_squares(x.data(), n) - ref.sum_squares(x.data(), n)) <= 1e-12 * scale);
            CHECK(k.max_abs(x.data(), n) == ref.max_abs(x.data(), n));
            auto a = y, b = y;
            k.axpy(-0.75, x.data(), a.data(), n);
            ref.axpy(-0.75, x.data(), b.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
        }
    }
}

TEST_CASE("max_abs sees negative extremes and the last element") {
    for (Isa isa : available_isas()) {
        const auto& k = kernels_for(isa);
        std::vector<double> v(13, 0.5);
        v[12] = -9.0;
        CHECK(k.max_abs(v.data(), v.size()) == 9.0);
    }
}

TEST_CASE("dispatch exposes the scalar table and rejects missing variants") {
    const auto isas = available_isas();
    REQUIRE(!isas.empty());
    CHECK(isas.front() == Isa::scalar);
    const Isa all[] = {Isa::scalar, Isa::avx2, Isa::neon};
    for (Isa isa : all) {
        const bool present = std::find(isas.begin(), isas.end(), isa) != isas.end();
        if (!present) CHECK_THROWS_AS(kernels_for(isa), std::invalid_argument);
    }
    const auto& active = active_kernels();
    CHECK(std::find(isas.begin(), isas.end(), active.isa) != isas.end());
}

TEST_CASE("span wrappers use the shorter length") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 1.0};
    CHECK(dot(x, y) == doctest::Approx(3.0));
    CHECK(sum_squares(x) == doctest::Approx(14.0));
    CHECK(max_abs(x) == 3.0);
}
