#include <gtest/gtest.h>

#include <random>

#include "left/stft.hpp"

using namespace left;

namespace {

Tensor random_window(std::size_t t, std::size_t c, unsigned seed) {
  std::mt19937_64 rng(seed);
  return randn({t, c}, rng);
}

StftConfig default_cfg() { return StftConfig{}; }

StftConfig rect_cfg(std::size_t win, std::size_t hop) {
  StftConfig cfg;
  cfg.window_length = win;
  cfg.hop = hop;
  cfg.fft_size = win;
  cfg.window_kind = WindowKind::rect;
  cfg.center_pad = false;
  return cfg;
}

}  // namespace

TEST(Stft, ZeroWindowGivesZeroSpectrogram) {
  Tensor x({128, 3});
  Spectrogram s = stft_forward(x, default_cfg());
  EXPECT_EQ(s.planes.max_abs(), 0.0);
}

TEST(Stft, ShapesMatchConfig) {
  StftConfig cfg = default_cfg();
  Tensor x = random_window(192, 2, 1);
  Spectrogram s = stft_forward(x, cfg);
  EXPECT_EQ(s.channels(), 2u);
  EXPECT_EQ(s.bins(), cfg.fft_size / 2 + 1);
  EXPECT_EQ(s.frames(), cfg.frames(192));
  EXPECT_EQ(s.origin_length, 192u);
}

TEST(Stft, RejectsShortWindow) {
  Tensor x = random_window(32, 1, 2);
  EXPECT_THROW(stft_forward(x, default_cfg()), invalid_input);
}

TEST(Stft, Linearity) {
  StftConfig cfg = default_cfg();
  Tensor x = random_window(128, 2, 3), y = random_window(128, 2, 4);
  double a = 1.7, b = -0.4;
  Tensor mix({128, 2});
  for (std::size_t i = 0; i < mix.numel(); ++i)
    mix.data[i] = a * x.data[i] + b * y.data[i];
  Spectrogram sm = stft_forward(mix, cfg);
  Spectrogram sx = stft_forward(x, cfg);
  Spectrogram sy = stft_forward(y, cfg);
  for (std::size_t i = 0; i < sm.planes.numel(); ++i)
    EXPECT_NEAR(sm.planes.data[i], a * sx.planes.data[i] + b * sy.planes.data[i],
                1e-9);
}

// First frame of an impulse at t=0 under a rectangular, uncentered window
// equals the DFT of the window-masked impulse.
TEST(Stft, ImpulseFirstFrameMatchesDftOracle) {
  StftConfig cfg = rect_cfg(16, 8);
  Tensor x({64, 1});
  x.at(0, 0) = 1.0;
  Spectrogram s = stft_forward(x, cfg);

  std::vector<double> masked(16, 0.0);
  masked[0] = 1.0;
  std::vector<fft::cd> oracle;
  fft::naive_dft(masked, oracle);
  double scale = cfg.spectrum_scale();
  for (std::size_t k = 0; k < s.bins(); ++k) {
    EXPECT_NEAR(s.planes.at(0, 0, k, 0), scale * oracle[k].real(), 1e-10);
    EXPECT_NEAR(s.planes.at(0, 1, k, 0), scale * oracle[k].imag(), 1e-10);
  }
}

// A bin-aligned cosine concentrates energy in its bin in every frame.
TEST(Stft, BinAlignedCosineConcentrates) {
  StftConfig cfg = rect_cfg(32, 16);
  std::size_t bin = 4;
  Tensor x({128, 1});
  for (std::size_t t = 0; t < 128; ++t)
    x.at(t, 0) = std::cos(2.0 * M_PI * double(bin) * double(t) / 32.0);
  Spectrogram s = stft_forward(x, cfg);
  for (std::size_t f = 0; f < s.frames(); ++f) {
    double peak = std::hypot(s.planes.at(0, 0, bin, f), s.planes.at(0, 1, bin, f));
    ASSERT_GT(peak, 1.0);
    for (std::size_t k = 0; k < s.bins(); ++k) {
      if (k == bin) continue;
      double side = std::hypot(s.planes.at(0, 0, k, f), s.planes.at(0, 1, k, f));
      EXPECT_LT(side, 1e-6 * peak) << "frame " << f << " bin " << k;
    }
  }
}

TEST(Stft, RoundTripWhiteNoise) {
  StftConfig cfg = default_cfg();
  Tensor x = random_window(192, 3, 5);
  Tensor back = stft_inverse(stft_forward(x, cfg));
  EXPECT_LT(rel_l2_error(back, x), 1e-5);
}

TEST(Stft, RoundTripHundredRandomWindows) {
  StftConfig cfg = default_cfg();
  for (unsigned i = 0; i < 100; ++i) {
    std::size_t t = 96 + (i % 5) * 32;
    std::size_t c = 1 + i % 3;
    Tensor x = random_window(t, c, 100 + i);
    Tensor back = stft_inverse(stft_forward(x, cfg));
    ASSERT_LT(rel_l2_error(back, x), 1e-5) << "case " << i;
  }
}

TEST(Stft, RoundTripLinearRamp) {
  StftConfig cfg = default_cfg();
  Tensor x({160, 1});
  for (std::size_t t = 0; t < 160; ++t) x.at(t, 0) = double(t) / 160.0 - 0.5;
  Tensor back = stft_inverse(stft_forward(x, cfg));
  EXPECT_LT(rel_l2_error(back, x), 1e-5);
}

TEST(Stft, ZeroSpectrogramGivesZeroSignal) {
  StftConfig cfg = default_cfg();
  Spectrogram s;
  s.config = cfg;
  s.origin_length = 128;
  s.planes = Tensor({2, 2, cfg.bins(), cfg.frames(128)});
  Tensor x = stft_inverse(s);
  EXPECT_EQ(x.max_abs(), 0.0);
}

TEST(Stft, InverseRejectsInconsistentShapes) {
  StftConfig cfg = default_cfg();
  Spectrogram s;
  s.config = cfg;
  s.origin_length = 128;
  s.planes = Tensor({2, 2, cfg.bins() - 1, cfg.frames(128)});
  EXPECT_THROW(stft_inverse(s), invalid_input);
}

TEST(Stft, OutputLengthEqualsOriginLength) {
  StftConfig cfg = default_cfg();
  Tensor x = random_window(200, 1, 6);
  Tensor back = stft_inverse(stft_forward(x, cfg));
  EXPECT_EQ(back.dim(0), 200u);
  EXPECT_EQ(back.dim(1), 1u);
}

// Finite-difference checks of the autograd nodes.
TEST(Stft, ForwardNodeGradient) {
  StftConfig cfg;
  cfg.window_length = 16;
  cfg.hop = 4;
  cfg.fft_size = 16;
  Tensor x = random_window(40, 2, 7);
  ag::Var xv = ag::param(x);
  ag::Var planes = ag::stft_node(xv, cfg);
  ag::Var loss = ag::mean_all(ag::square(planes));
  ag::backward(loss);

  std::mt19937_64 pick(8);
  for (int rep = 0; rep < 12; ++rep) {
    std::size_t i = pick() % x.numel();
    double h = 1e-6;
    auto eval = [&](double d) {
      Tensor xp = x;
      xp.data[i] += d;
      ag::Var v = ag::constant(xp);
      return ag::mean_all(ag::square(ag::stft_node(v, cfg)))->val.data[0];
    };
    double fd = (eval(h) - eval(-h)) / (2 * h);
    EXPECT_NEAR(xv->grad.data[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Stft, InverseNodeGradient) {
  StftConfig cfg;
  cfg.window_length = 16;
  cfg.hop = 4;
  cfg.fft_size = 16;
  std::size_t t = 40;
  Spectrogram s = stft_forward(random_window(t, 1, 9), cfg);
  Tensor planes = s.planes.reshaped({2, s.bins(), s.frames()});
  ag::Var pv = ag::param(planes);
  ag::Var back = ag::istft_node(pv, cfg, t);
  ag::backward(ag::mean_all(ag::square(back)));

  std::mt19937_64 pick(10);
  for (int rep = 0; rep < 12; ++rep) {
    std::size_t i = pick() % planes.numel();
    double h = 1e-6;
    auto eval = [&](double d) {
      Tensor pp = planes;
      pp.data[i] += d;
      ag::Var v = ag::constant(pp);
      return ag::mean_all(ag::square(ag::istft_node(v, cfg, t)))->val.data[0];
    };
    double fd = (eval(h) - eval(-h)) / (2 * h);
    double an = pv->grad.data[i];
    // DC/Nyquist imaginary parts are ignored by synthesis: both sides zero.
    EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(fd))) << "index " << i;
  }
}

TEST(Stft, NodeMatchesPlainTransforms) {
  StftConfig cfg = default_cfg();
  Tensor x = random_window(160, 2, 11);
  Spectrogram s = stft_forward(x, cfg);
  ag::Var planes = ag::stft_node(ag::constant(x), cfg);
  EXPECT_EQ(planes->val.data, s.planes.data);
  ag::Var back = ag::istft_node(ag::constant(planes->val), cfg, 160);
  Tensor inv = stft_inverse(s);
  EXPECT_EQ(back->val.data, inv.data);
}

TEST(Stft, ConfigValidation) {
  StftConfig cfg;
  cfg.hop = 100;
  EXPECT_THROW(cfg.validate(), invalid_input);
  cfg = StftConfig{};
  cfg.fft_size = 32;
  EXPECT_THROW(cfg.validate(), invalid_input);
  cfg = StftConfig{};
  cfg.center_pad = false;  // hann without centering cannot cover the edges
  EXPECT_THROW(cfg.validate(), invalid_input);
}
