#include "doctest.h"

#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "ddw/fft.hpp"

using ddw::fft::Plan;
using ddw::fft::Plan2d;

namespace {

// direct O(n^2) DFT oracle
template <class R>
std::vector<std::complex<R>> naive_dft(const std::vector<std::complex<R>>& x, int sign) {
    const std::size_t n = x.size();
    std::vector<std::complex<R>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0, 0};
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(j * k % n) / n;
            acc += std::complex<double>(x[j]) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = {static_cast<R>(acc.real()), static_cast<R>(acc.imag())};
    }
    return out;
}

std::vector<std::complex<double>> random_signal(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {dist(rng), dist(rng)};
    return x;
}

} // namespace

TEST_CASE("1-D transform matches the direct-summation oracle") {
    for (std::size_t n : {1u, 2u, 3u, 4u, 7u, 12u, 16u, 24u, 72u, 144u, 13u}) {
        auto x = random_signal(n, static_cast<unsigned>(n));
        auto expect = naive_dft(x, -1);
        Plan<double> plan(n);
        auto got = x;
        plan.forward(got.data());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(got[i].real() == doctest::Approx(expect[i].real()).epsilon(1e-9));
            CHECK(got[i].imag() == doctest::Approx(expect[i].imag()).epsilon(1e-9));
        }
    }
}

TEST_CASE("inverse(forward(x)) == x") {
    for (std::size_t n : {5u, 8u, 30u, 144u}) {
        auto x = random_signal(n, 100 + static_cast<unsigned>(n));
        auto y = x;
        Plan<double> plan(n);
        plan.forward(y.data());
        plan.inverse(y.data());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y[i].real() == doctest::Approx(x[i].real()).epsilon(1e-10));
            CHECK(y[i].imag() == doctest::Approx(x[i].imag()).epsilon(1e-10));
        }
    }
}

TEST_CASE("2-D transform matches direct double summation") {
    const std::size_t H = 4, W = 6;
    auto x = random_signal(H * W, 77);
    Plan2d<double> plan(H, W);
    auto got = x;
    plan.forward(got.data());

    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
            std::complex<double> acc{0, 0};
            for (std::size_t j = 0; j < H; ++j)
                for (std::size_t k = 0; k < W; ++k) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(h * j) / H + static_cast<double>(w * k) / W);
                    acc += x[j * W + k] * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            CHECK(got[h * W + w].real() == doctest::Approx(acc.real()).epsilon(1e-9));
            CHECK(got[h * W + w].imag() == doctest::Approx(acc.imag()).epsilon(1e-9));
        }

    plan.inverse(got.data());
    for (std::size_t i = 0; i < H * W; ++i) {
        CHECK(got[i].real() == doctest::Approx(x[i].real()).epsilon(1e-10));
        CHECK(got[i].imag() == doctest::Approx(x[i].imag()).epsilon(1e-10));
    }
}
