#include <gtest/gtest.h>

#include <random>

#include "left/filterbank.hpp"

using namespace left;

namespace {

FilterbankState make_state(std::vector<std::size_t> r, double tau = 0.01,
                           Tensor u = Tensor()) {
  FilterbankState st;
  st.r = std::move(r);
  st.tau = tau;
  st.u = u.numel() ? u : Tensor({st.r.size()});
  return st;
}

// Frozen on a one-off calibration sweep over random (u, tau, x) draws;
// 1.5x headroom over the observed maxima. Ratios are only meaningful while
// the leakage sits above the double-precision FFT noise floor.
double alias_bound_constant(std::size_t r) {
  switch (r) {
    case 2: return 0.22;
    case 4: return 0.22;
    case 8: return 0.15;
    case 16: return 0.09;
    default: return 0.25;
  }
}

}  // namespace

TEST(Filterbank, NyquistCutoffs) {
  Tensor c = nyquist_cutoffs({16, 8, 4});
  EXPECT_DOUBLE_EQ(c.data[0], 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(c.data[1], 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(c.data[2], 1.0 / 8.0);

  Tensor single = nyquist_cutoffs({1});
  EXPECT_DOUBLE_EQ(single.data[0], 0.5);

  Tensor equal = nyquist_cutoffs({4, 4});
  EXPECT_DOUBLE_EQ(equal.data[0], 0.125);
  EXPECT_DOUBLE_EQ(equal.data[1], 0.125);

  EXPECT_THROW(nyquist_cutoffs({4, 8}), invalid_input);
  EXPECT_THROW(nyquist_cutoffs({4, 0}), invalid_input);
}

TEST(Filterbank, LearnedEdgesZeroParams) {
  auto st = make_state({16, 8, 4});
  Tensor e = learned_edges(st);
  ASSERT_EQ(e.numel(), 4u);
  EXPECT_DOUBLE_EQ(e.data[0], 0.0);
  EXPECT_NEAR(e.data[1], 1.0 / 64.0, 1e-15);
  EXPECT_NEAR(e.data[2], 5.0 / 128.0, 1e-15);
  EXPECT_NEAR(e.data[3], 21.0 / 256.0, 1e-15);
}

TEST(Filterbank, EdgeSaturation) {
  auto hi = make_state({16, 8, 4}, 0.01, Tensor({3}, 40.0));
  Tensor eh = learned_edges(hi);
  Tensor c = nyquist_cutoffs(hi.r);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(eh.data[k + 1], c.data[k], 1e-12);

  auto lo = make_state({16, 8, 4}, 0.01, Tensor({3}, -40.0));
  Tensor el = learned_edges(lo);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(el.data[k], 0.0, 1e-12);
}

// Lemma-style feasibility: monotone edges, never above the cutoffs.
TEST(Filterbank, EdgeFeasibilityRandomDraws) {
  std::mt19937_64 rng(42);
  std::vector<std::vector<std::size_t>> rsets = {{16, 8, 4}, {8, 4, 2}, {4, 2, 1},
                                                 {8, 8, 2},  {32, 16, 8, 4, 2}};
  for (int rep = 0; rep < 1000; ++rep) {
    const auto& rs = rsets[rep % rsets.size()];
    auto st = make_state(rs, 0.01, rand_uniform({rs.size()}, rng, -10.0, 10.0));
    Tensor e = learned_edges(st);
    Tensor c = nyquist_cutoffs(rs);
    for (std::size_t k = 0; k < rs.size(); ++k) {
      ASSERT_GE(e.data[k + 1], e.data[k]) << "rep " << rep;
      ASSERT_LE(e.data[k + 1], c.data[k]) << "rep " << rep;
    }
  }
}

TEST(Filterbank, PartitionOfUnityOnCoveredBand) {
  std::mt19937_64 rng(7);
  Tensor grid = freq_grid(256);
  for (int rep = 0; rep < 100; ++rep) {
    double tau = std::pow(10.0, -1.0 - 2.0 * (rep % 10) / 9.0);  // 1e-1 .. 1e-3
    auto st = make_state({16, 8, 4}, tau, rand_uniform({3}, rng, -10.0, 10.0));
    Tensor edges = learned_edges(st);
    BandMasks masks = band_masks(edges, st.tau, st.eps, grid);
    for (std::size_t f = 0; f < grid.numel(); ++f) {
      double raw = 0, norm = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        norm += masks.values.at(k, f);
      }
      // recompute the raw mask sum to find the covered band
      for (std::size_t k = 0; k < 3; ++k) {
        auto s = [&](double x) { return 1.0 / (1.0 + std::exp(-x / (tau + st.eps))); };
        raw += s(grid.data[f] - edges.data[k]) - s(grid.data[f] - edges.data[k + 1]);
      }
      if (raw > 1e-4) {
        ASSERT_NEAR(norm, 1.0, 1e-3) << "rep " << rep << " bin " << f;
      }
      ASSERT_GE(norm, -1e-12);
      ASSERT_LE(norm, 1.0 + 1e-12);
    }
  }
}

TEST(Filterbank, MasksConvergeToIndicators) {
  // At a distance of 3*tau from an edge a logistic step is still
  // sigmoid(3) ~ 0.047 away from saturation, so that is the pointwise bound;
  // convergence is checked by annealing tau and watching the worst deviation
  // fall.
  Tensor grid = freq_grid(512);
  Tensor edges = Tensor::row({0.0, 0.1, 0.25, 0.5});
  double prev_worst = 1e300;
  for (double tau : {1e-2, 1e-3, 1e-4}) {
    BandMasks masks = band_masks(edges, tau, 1e-8, grid);
    double worst = 0;
    for (std::size_t f = 0; f < grid.numel(); ++f) {
      double x = grid.data[f];
      bool near_edge = false;
      for (std::size_t k = 0; k < 4; ++k)
        if (std::abs(x - edges.data[k]) < 3 * tau) near_edge = true;
      if (near_edge) continue;
      for (std::size_t k = 0; k < 3; ++k) {
        double lo = edges.data[k], hi = edges.data[k + 1];
        double expect = (x > lo && x <= hi) ? 1.0 : 0.0;
        double dev = std::abs(masks.values.at(k, f) - expect);
        ASSERT_LE(dev, 0.05) << "tau=" << tau << " k=" << k << " f=" << x;
        worst = std::max(worst, dev);
      }
    }
    ASSERT_LT(worst, prev_worst);
    prev_worst = worst;
  }
}

TEST(Filterbank, SingleBandCoversItsSupport) {
  Tensor grid = freq_grid(256);
  BandMasks masks = band_masks(Tensor::row({0.0, 0.5}), 1e-3, 1e-8, grid);
  for (std::size_t f = 1; f < grid.numel() - 1; ++f) {
    double x = grid.data[f];
    if (x < 0.01 || x > 0.49) continue;
    ASSERT_NEAR(masks.values.at(0, f), 1.0, 1e-3);
  }
}

TEST(Filterbank, MasksRejectNonmonotoneEdges) {
  Tensor grid = freq_grid(64);
  EXPECT_THROW(band_masks(Tensor::row({0.0, 0.3, 0.2}), 0.01, 1e-8, grid),
               invalid_input);
}

TEST(Filterbank, DecomposeZeroInput) {
  auto st = make_state({8, 4, 2});
  ScaleComponents sc = band_decompose_downsample(Tensor({64, 2}), st, 16);
  ASSERT_EQ(sc.components.size(), 3u);
  for (const auto& comp : sc.components) EXPECT_EQ(comp.max_abs(), 0.0);
}

TEST(Filterbank, DecomposeShapes) {
  auto st = make_state({16, 8, 4});
  Tensor x({100, 3});
  ScaleComponents sc = band_decompose_downsample(x, st, 30);
  EXPECT_EQ(sc.components[0].dim(0), 7u);   // ceil(100/16)
  EXPECT_EQ(sc.components[1].dim(0), 13u);  // ceil(100/8)
  EXPECT_EQ(sc.components[2].dim(0), 25u);  // ceil(100/4)
  for (const auto& comp : sc.components) EXPECT_EQ(comp.dim(1), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_GE(sc.leakages.data[k], 0.0);
}

TEST(Filterbank, DecomposeRejectsShortWindow) {
  auto st = make_state({16, 8, 4});
  EXPECT_THROW(band_decompose_downsample(Tensor({8, 1}), st, 0), invalid_input);
}

TEST(Filterbank, LowToneLandsInCoarsestBand) {
  // Default edges put e_1 at 1/64 ~ 0.0156; a sharp mask keeps the 0.01 tone
  // well inside band 1.
  auto st = make_state({16, 8, 4}, 1e-3);
  std::size_t t = 128;
  Tensor x({t, 1});
  for (std::size_t i = 0; i < t; ++i)
    x.at(i, 0) = std::sin(2.0 * M_PI * 0.01 * double(i));
  double energy[3] = {0, 0, 0}, total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor band = band_component_fullrate(x, st, k, 32);
    double e = band.l2_norm();
    energy[k] = e * e;
    total += e * e;
  }
  EXPECT_GT(energy[0] / total, 0.95);
}

// Un-downsampled band components sum to the total-mask filtered signal.
TEST(Filterbank, ComponentsSumMatchesSpectralOracle) {
  std::mt19937_64 rng(9);
  auto st = make_state({8, 4, 2}, 0.02, rand_uniform({3}, rng, -2.0, 2.0));
  std::size_t t = 96, pad = 16, n = t + 2 * pad;
  Tensor x = randn({t, 1}, rng);

  Tensor sum({t, 1});
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor band = band_component_fullrate(x, st, k, pad);
    for (std::size_t i = 0; i < t; ++i) sum.at(i, 0) += band.at(i, 0);
  }

  // independent path: single filter by the sum of normalized masks
  BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
  std::vector<double> col(t);
  for (std::size_t i = 0; i < t; ++i) col[i] = x.at(i, 0);
  auto ext = detail::reflect_pad(col, pad);
  std::vector<fft::cd> spec;
  fft::rfft(ext, spec);
  for (std::size_t f = 0; f < spec.size(); ++f) {
    double m = 0;
    for (std::size_t k = 0; k < 3; ++k) m += masks.values.at(k, f);
    spec[f] *= m;
  }
  std::vector<double> y;
  fft::irfft(spec, n, y);
  Tensor oracle({t, 1});
  for (std::size_t i = 0; i < t; ++i) oracle.at(i, 0) = y[pad + i];

  EXPECT_LT(rel_l2_error(sum, oracle), 1e-6);
}

TEST(Filterbank, LeakageAtSaturatedEdgesVanishes) {
  // Edges driven to the cutoffs with a hard mask leave almost no mass above.
  auto st = make_state({8, 4, 2}, 1e-5, Tensor({3}, 40.0));
  std::size_t n = 256;
  BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
  Tensor cut = nyquist_cutoffs(st.r);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_LT(aliasing_leakage(masks, cut, k, n), 1e-6);
}

TEST(Filterbank, LeakageGrowsWithTau) {
  std::size_t n = 256;
  Tensor cut = nyquist_cutoffs({8, 4, 2});
  double prev[3] = {-1, -1, -1};
  for (double tau : {1e-3, 1e-2, 1e-1}) {
    auto st = make_state({8, 4, 2}, tau);
    BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
    for (std::size_t k = 0; k < 3; ++k) {
      double eps_k = aliasing_leakage(masks, cut, k, n);
      EXPECT_GT(eps_k, prev[k]) << "tau=" << tau << " k=" << k;
      prev[k] = eps_k;
    }
  }
}

TEST(Filterbank, LeakageHalfCutoffSingleBand) {
  std::size_t n = 512;
  auto st = make_state({2}, 1e-3);
  // e_1 = c_1/2 = 0.125 via sigmoid(0) on a single band with c = 0.25
  Tensor edges = Tensor::row({0.0, 0.125});
  BandMasks masks = band_masks(edges, st.tau, st.eps, freq_grid(n));
  EXPECT_LT(aliasing_leakage(masks, nyquist_cutoffs(st.r), 0, n), 1e-4);
}

TEST(Filterbank, LeakageIndexOutOfRange) {
  std::size_t n = 128;
  auto st = make_state({4, 2});
  BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
  EXPECT_THROW(aliasing_leakage(masks, nyquist_cutoffs(st.r), 5, n), invalid_input);
}

TEST(Filterbank, BandLimitedInputHasNoAliasing) {
  std::mt19937_64 rng(11);
  auto st = make_state({8, 4, 2}, 1e-4);
  std::size_t t = 128, pad = 32;
  Tensor x = randn({t, 1}, rng);
  // Band 0 with sharp masks holds only content below its cutoff.
  double alias = aliasing_energy_oracle(x, st, 0, pad);
  EXPECT_LT(alias, 1e-6 * x.l2_norm());
}

TEST(Filterbank, PureToneAboveCutoffAliasesCompletely) {
  // A tone entirely above the cutoff (mask identically 1 there) folds all of
  // its energy; the folding therefore returns the decimated tone's norm.
  std::size_t t = 128, r = 4;
  Tensor tone({t, 1});
  for (std::size_t i = 0; i < t; ++i)
    tone.at(i, 0) = std::cos(2.0 * M_PI * 24.0 * double(i) / double(t));  // f=0.1875
  double alias = alias_energy_of_band(tone, r);
  Tensor dec({t / r, 1});
  for (std::size_t m = 0; m < t / r; ++m) dec.at(m, 0) = tone.at(r * m, 0);
  EXPECT_NEAR(alias, dec.l2_norm(), 1e-6);
}

TEST(Filterbank, AliasingShrinksAlongAnnealingPath) {
  std::mt19937_64 rng(13);
  std::size_t t = 128, pad = 32, n = t + 2 * pad;
  Tensor cut = nyquist_cutoffs({8, 4, 2});
  for (int rep = 0; rep < 50; ++rep) {
    Tensor u = rand_uniform({3}, rng, -3.0, 3.0);
    Tensor x = randn({t, 2}, rng);
    double prev_alias = 1e300, prev_eps = 1e300;
    for (double tau : {0.1, 0.01, 0.001}) {
      auto st = make_state({8, 4, 2}, tau, u);
      BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
      double eps_k = aliasing_leakage(masks, cut, 1, n);
      double alias = aliasing_energy_oracle(x, st, 1, pad);
      ASSERT_LE(eps_k, prev_eps + 1e-12) << "rep " << rep;
      ASSERT_LE(alias, prev_alias + 1e-12) << "rep " << rep;
      prev_eps = eps_k;
      prev_alias = alias;
    }
  }
}

// Frozen-constant form of the aliasing bound on fresh random draws.
TEST(Filterbank, AliasingBoundWithFrozenConstants) {
  std::mt19937_64 rng(2025);
  std::size_t t = 128, pad = 32, n = t + 2 * pad;
  Tensor cut = nyquist_cutoffs({16, 8, 4});
  for (int rep = 0; rep < 50; ++rep) {
    double tau = std::pow(10.0, -1.0 - 2.0 * (rep % 5) / 4.0);
    auto st = make_state({16, 8, 4}, tau, rand_uniform({3}, rng, -3.0, 3.0));
    Tensor x = randn({t, 1}, rng);
    std::vector<double> col(t);
    for (std::size_t i = 0; i < t; ++i) col[i] = x.at(i, 0);
    auto ext = detail::reflect_pad(col, pad);
    double xnorm = 0;
    for (double v : ext) xnorm += v * v;
    xnorm = std::sqrt(xnorm);
    BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, freq_grid(n));
    for (std::size_t k = 0; k < 3; ++k) {
      double eps_k = aliasing_leakage(masks, cut, k, n);
      if (eps_k < 1e-9) continue;  // below the FFT noise floor
      double alias = aliasing_energy_oracle(x, st, k, pad);
      ASSERT_LE(alias, alias_bound_constant(st.r[k]) * xnorm * eps_k)
          << "rep " << rep << " band " << k;
    }
  }
}

// d(loss)/du_k through edges, masks, synthesis and decimation.
TEST(Filterbank, GradientThroughDecompositionMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::vector<std::size_t> rs = {8, 4, 2};
  std::size_t t = 64, pad = 16, n = t + 2 * pad;
  Tensor x = randn({t, 2}, rng);
  Tensor u0 = rand_uniform({3}, rng, -2.0, 2.0);
  Tensor cut = nyquist_cutoffs(rs);
  Tensor grid = freq_grid(n);
  // Milder mask slopes keep the central-difference reference itself accurate
  // at the 1e-5 step; sharper tau only degrades the reference, not the tape.
  double tau = 0.05, eps = 1e-8;

  auto loss_of = [&](const Tensor& u, bool with_grad, Tensor* gu) {
    ag::Var uv = with_grad ? ag::param(u) : ag::constant(u);
    ag::Var edges = learned_edges_var(uv, cut);
    auto masks = band_masks_var(edges, tau, eps, grid);
    ag::Var xv = ag::constant(x);
    ag::Var total;
    for (std::size_t k = 0; k < rs.size(); ++k) {
      ag::Var comp = ag::band_component_node(xv, masks[k], rs[k], pad);
      ag::Var term = ag::mean_all(ag::square(comp));
      total = k == 0 ? term : ag::add(total, term);
    }
    if (with_grad) {
      ag::backward(total);
      *gu = uv->grad;
    }
    return total->val.data[0];
  };

  Tensor gu;
  loss_of(u0, true, &gu);
  for (std::size_t k = 0; k < 3; ++k) {
    double h = 1e-5;
    Tensor up = u0, um = u0;
    up.data[k] += h;
    um.data[k] -= h;
    double fd = (loss_of(up, false, nullptr) - loss_of(um, false, nullptr)) / (2 * h);
    double rel = std::abs(gu.data[k] - fd) / std::max(1e-12, std::abs(fd));
    EXPECT_LT(rel, 1e-4) << "u_" << k << " analytic " << gu.data[k] << " fd " << fd;
  }
}

TEST(Filterbank, GradientThroughInputMatchesFiniteDifferences) {
  std::mt19937_64 rng(19);
  std::vector<std::size_t> rs = {4, 2};
  std::size_t t = 48, pad = 8, n = t + 2 * pad;
  Tensor x0 = randn({t, 1}, rng);
  Tensor u0 = rand_uniform({2}, rng, -1.0, 1.0);
  Tensor cut = nyquist_cutoffs(rs);
  Tensor grid = freq_grid(n);

  auto loss_of = [&](const Tensor& x, bool with_grad, Tensor* gx) {
    ag::Var xv = with_grad ? ag::param(x) : ag::constant(x);
    auto masks = band_masks_var(learned_edges_var(ag::constant(u0), cut), 0.02,
                                1e-8, grid);
    ag::Var total;
    for (std::size_t k = 0; k < rs.size(); ++k) {
      ag::Var comp = ag::band_component_node(xv, masks[k], rs[k], pad);
      ag::Var term = ag::mean_all(ag::square(comp));
      total = k == 0 ? term : ag::add(total, term);
    }
    if (with_grad) {
      ag::backward(total);
      *gx = xv->grad;
    }
    return total->val.data[0];
  };

  Tensor gx;
  loss_of(x0, true, &gx);
  std::mt19937_64 pick(23);
  for (int rep = 0; rep < 10; ++rep) {
    std::size_t i = pick() % x0.numel();
    double h = 1e-5;
    Tensor xp = x0, xm = x0;
    xp.data[i] += h;
    xm.data[i] -= h;
    double fd = (loss_of(xp, false, nullptr) - loss_of(xm, false, nullptr)) / (2 * h);
    EXPECT_NEAR(gx.data[i], fd, 1e-4 * std::max(1.0, std::abs(fd)));
  }
}
