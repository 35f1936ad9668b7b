#include <gtest/gtest.h>

#include <random>

#include "left/fft.hpp"

using namespace left;

namespace {

std::vector<double> random_signal(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

}  // namespace

TEST(Fft, MatchesNaiveDftOracle) {
  for (std::size_t n : {16u, 64u, 192u, 320u, 100u, 97u}) {
    auto x = random_signal(n, 11 + unsigned(n));
    std::vector<fft::cd> fast, slow;
    fft::rfft(x, fast);
    fft::naive_dft(x, slow);
    ASSERT_EQ(fast.size(), fft::onesided_bins(n));
    for (std::size_t k = 0; k < fast.size(); ++k) {
      EXPECT_NEAR(fast[k].real(), slow[k].real(), 1e-9) << "n=" << n << " k=" << k;
      EXPECT_NEAR(fast[k].imag(), slow[k].imag(), 1e-9) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Fft, RoundTrip) {
  for (std::size_t n : {8u, 64u, 320u, 123u}) {
    auto x = random_signal(n, 3 + unsigned(n));
    std::vector<fft::cd> y;
    std::vector<double> xr;
    fft::rfft(x, y);
    fft::irfft(y, n, xr);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(xr[i], x[i], 1e-12);
  }
}

// <Ax, y> == <x, A^T y> for the one-sided forward transform.
TEST(Fft, RfftAdjointIdentity) {
  for (std::size_t n : {16u, 64u, 320u, 51u}) {
    auto x = random_signal(n, 21 + unsigned(n));
    std::size_t f = fft::onesided_bins(n);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    std::vector<fft::cd> y(f);
    for (auto& v : y) v = fft::cd(nd(rng), nd(rng));

    std::vector<fft::cd> ax;
    fft::rfft(x, ax);
    double lhs = 0;
    for (std::size_t k = 0; k < f; ++k)
      lhs += ax[k].real() * y[k].real() + ax[k].imag() * y[k].imag();

    std::vector<double> aty;
    fft::rfft_adjoint(y, n, aty);
    double rhs = 0;
    for (std::size_t i = 0; i < n; ++i) rhs += x[i] * aty[i];

    EXPECT_NEAR(lhs, rhs, 1e-8 * (std::abs(lhs) + 1.0));
  }
}

TEST(Fft, IrfftAdjointIdentity) {
  for (std::size_t n : {16u, 64u, 320u, 51u}) {
    std::size_t f = fft::onesided_bins(n);
    std::mt19937_64 rng(31 + n);
    std::normal_distribution<double> nd;
    std::vector<fft::cd> s(f);
    for (auto& v : s) v = fft::cd(nd(rng), nd(rng));
    auto g = random_signal(n, 5 + unsigned(n));

    std::vector<double> as;
    fft::irfft(s, n, as);
    double lhs = 0;
    for (std::size_t i = 0; i < n; ++i) lhs += as[i] * g[i];

    std::vector<fft::cd> atg;
    fft::irfft_adjoint(g, n, atg);
    double rhs = 0;
    for (std::size_t k = 0; k < f; ++k) {
      // DC/Nyquist imaginary parts are ignored by synthesis; the adjoint
      // returns zero there, so the pairing must skip what synthesis skips.
      bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
      rhs += s[k].real() * atg[k].real();
      if (!edge) rhs += s[k].imag() * atg[k].imag();
    }
    EXPECT_NEAR(lhs, rhs, 1e-8 * (std::abs(lhs) + 1.0));
  }
}
