#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "left/autograd.hpp"
#include "left/nn.hpp"

using namespace left;
using ag::Var;

namespace {

// Central finite differences of a scalar function against the tape gradient.
// Builders get fresh leaf Vars each evaluation so the tape cannot leak state.
void check_gradient(std::function<Var(const std::vector<Var>&)> f,
                    std::vector<Tensor> leaves, double step = 1e-6,
                    double tol = 1e-6) {
  std::vector<Var> vars;
  for (auto& t : leaves) vars.push_back(ag::param(t));
  Var out = f(vars);
  ag::backward(out);

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < leaves[li].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> vs;
        for (std::size_t j = 0; j < leaves.size(); ++j) {
          Tensor t = leaves[j];
          if (j == li) t.data[i] += delta;
          vs.push_back(ag::param(t));
        }
        return f(vs)->val.data[0];
      };
      double fd = (eval(step) - eval(-step)) / (2 * step);
      double an = vars[li]->grad.data[i];
      double scale = std::max({1.0, std::abs(fd), std::abs(an)});
      EXPECT_NEAR(an, fd, tol * scale) << "leaf " << li << " index " << i;
    }
  }
}

Tensor rnd(const Shape& s, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return randn(s, rng, scale);
}

}  // namespace

TEST(Autograd, ElementwiseChain) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var y = ag::mul(ag::sigmoid(v[0]), ag::vtanh(v[1]));
        y = ag::add(y, ag::gelu(v[0]));
        return ag::mean_all(ag::square(y));
      },
      {rnd({3, 4}, 1), rnd({3, 4}, 2)});
}

TEST(Autograd, DivLogExpAbs) {
  Tensor a = rnd({5}, 3);
  for (auto& v : a.data) v = std::abs(v) + 0.5;
  Tensor b = rnd({5}, 4);
  for (auto& v : b.data) v = std::abs(v) + 0.5;
  check_gradient(
      [](const std::vector<Var>& v) {
        return ag::mean_all(ag::vlog(ag::div(v[0], v[1])));
      },
      {a, b});
}

TEST(Autograd, MatmulTransposeSlices) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var m = ag::matmul(v[0], ag::transpose2d(v[1]));
        m = ag::slice_rows(m, 1, 3);
        m = ag::slice_cols(m, 0, 2);
        return ag::sum_all(m);
      },
      {rnd({4, 3}, 5), rnd({5, 3}, 6)});
}

TEST(Autograd, SoftmaxRows) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var p = ag::softmax_rows(v[0]);
        return ag::mean_all(ag::square(p));
      },
      {rnd({3, 5}, 7)});
}

TEST(Autograd, MaskedSoftmaxZeroesDisallowed) {
  Tensor mask({2, 4});
  mask.at(0, 0) = mask.at(0, 1) = 1;
  mask.at(1, 2) = mask.at(1, 3) = 1;
  Var x = ag::param(rnd({2, 4}, 8));
  Var p = ag::softmax_rows(x, &mask);
  EXPECT_EQ(p->val.at(0, 2), 0.0);
  EXPECT_EQ(p->val.at(0, 3), 0.0);
  EXPECT_EQ(p->val.at(1, 0), 0.0);
  EXPECT_NEAR(p->val.at(0, 0) + p->val.at(0, 1), 1.0, 1e-12);

  check_gradient(
      [mask](const std::vector<Var>& v) {
        Var p = ag::softmax_rows(v[0], &mask);
        return ag::mean_all(ag::square(p));
      },
      {rnd({2, 4}, 9)});
}

TEST(Autograd, LayerNorm) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var y = ag::layer_norm_rows(v[0], v[1], v[2]);
        return ag::mean_all(ag::square(y));
      },
      {rnd({4, 6}, 10), rnd({6}, 11, 0.3), rnd({6}, 12, 0.3)}, 1e-6, 1e-5);
}

TEST(Autograd, ReductionsAndBroadcast) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var y = ag::add_rowvec(v[0], v[1]);
        y = ag::mul_colvec(y, v[2]);
        Var m = ag::mean_rows(y);
        return ag::sum_all(ag::square(m));
      },
      {rnd({4, 3}, 13), rnd({3}, 14), rnd({4}, 15)});
}

TEST(Autograd, GatherConcatPad) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var g = ag::gather_rows(v[0], {0, 0, 2, 1, 2});
        Var c = ag::concat_rows({g, v[1]});
        Var p = ag::pad_rows(c, 2);
        return ag::mean_all(ag::square(p));
      },
      {rnd({3, 4}, 16), rnd({2, 4}, 17)});
}

TEST(Autograd, SmoothL1) {
  // Residuals straddle the Huber kink; keep sample points away from it.
  Tensor a = Tensor::row({0.0, 0.3, -0.2, 2.0, -3.0, 0.7});
  Tensor b = Tensor::row({0.1, 0.0, 0.2, 0.0, 0.5, 0.2});
  check_gradient(
      [](const std::vector<Var>& v) { return ag::smooth_l1_mean(v[0], v[1]); },
      {a.reshaped({2, 3}), b.reshaped({2, 3})});
}

TEST(Autograd, CosineRows) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var c = ag::cosine_rows(v[0], v[1]);
        return ag::mean_all(ag::square(c));
      },
      {rnd({3, 4}, 18), rnd({2, 4}, 19)}, 1e-6, 1e-5);
}

TEST(Autograd, CosineZeroNormRowIsConstantZero) {
  Tensor h({2, 3});
  h.at(1, 0) = 1.0;  // row 0 stays all-zero
  Var hv = ag::param(h);
  Var pv = ag::param(rnd({2, 3}, 20));
  Var c = ag::cosine_rows(hv, pv);
  EXPECT_EQ(c->val.at(0, 0), 0.0);
  EXPECT_EQ(c->val.at(0, 1), 0.0);
  ag::backward(ag::sum_all(c));
  EXPECT_EQ(hv->grad.at(0, 0), 0.0);
  EXPECT_EQ(hv->grad.at(0, 1), 0.0);
}

TEST(Autograd, GradAccumulatesAcrossSharedSubgraphs) {
  Var x = ag::param(Tensor::scalar(2.0));
  Var y = ag::add(ag::square(x), ag::mul_scalar(x, 3.0));  // x^2 + 3x
  ag::backward(y);
  EXPECT_NEAR(x->grad.data[0], 2.0 * 2.0 + 3.0, 1e-12);
}

TEST(Autograd, Conv1dGradient) {
  std::mt19937_64 rng(21);
  nn::ParamStore ps;
  auto conv = nn::Conv1d::create(ps, "c", 2, 3, 3, rng);
  Tensor w0 = conv.w->val, b0 = conv.b->val;
  check_gradient(
      [&](const std::vector<Var>& v) {
        nn::Conv1d c;
        c.ks = 3;
        c.w = v[1];
        c.b = v[2];
        return ag::mean_all(ag::square(c(v[0])));
      },
      {rnd({6, 2}, 22), w0, b0});
}

TEST(Autograd, Conv2dGradient) {
  std::mt19937_64 rng(23);
  nn::ParamStore ps;
  auto conv = nn::Conv2d::create(ps, "c", 2, 2, 3, 3, rng);
  check_gradient(
      [&](const std::vector<Var>& v) {
        nn::Conv2d c;
        c.kh = c.kw = 3;
        c.w = v[1];
        c.b = v[2];
        return ag::mean_all(ag::square(c(v[0])));
      },
      {rnd({2, 4, 5}, 24), conv.w->val, conv.b->val});
}

TEST(Autograd, AttentionGradient) {
  std::mt19937_64 rng(25);
  nn::ParamStore ps;
  auto mha = nn::MultiheadAttention::create(ps, "a", 4, 2, rng);
  check_gradient(
      [&](const std::vector<Var>& v) {
        nn::MultiheadAttention m = mha;
        m.wq.w = v[1];
        m.wk.w = v[2];
        m.wv.w = v[3];
        m.wo.w = v[4];
        return ag::mean_all(ag::square(m(v[0], v[0])));
      },
      {rnd({3, 4}, 26), mha.wq.w->val, mha.wk.w->val, mha.wv.w->val, mha.wo.w->val},
      1e-6, 1e-5);
}

TEST(Autograd, StackScalarsAndIndex) {
  check_gradient(
      [](const std::vector<Var>& v) {
        Var a = ag::at_index(v[0], 1);
        Var b = ag::at_index(v[0], 3);
        Var s = ag::stack_scalars({a, ag::mul(a, b), b});
        return ag::sum_all(ag::square(s));
      },
      {rnd({5}, 27)});
}
