#include <doctest.h>

#include <cmath>
#include <random>

#include "cloudpatch/adam.hpp"
#include "cloudpatch/loss.hpp"
#include "cloudpatch/lstm.hpp"
#include "gradcheck.hpp"

using namespace cloudpatch;

TEST_CASE("lstm_step: zero weights give the closed form") {
  LayerParams<double> p{"l", LayerKind::kLstm, {{1, 4}, {0, 0, 0, 0}}, {{1, 4}, {0, 0, 0, 0}},
                        {{4}, {0, 0, 0, 0}}};
  const Tensor4<double> x(Shape4{1, 1, 1, 1}, {1.0});
  const Tensor4<double> h(Shape4{1, 1, 1, 1}, {0.0});
  const Tensor4<double> c(Shape4{1, 1, 1, 1}, {2.0});
  const auto r = lstm_step(x, h, c, p);
  // i = f = o = 0.5, g = 0: c' = 0.5 * 2, h' = 0.5 * tanh(1)
  CHECK(r.c[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.h[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
}

TEST_CASE("lstm: shape mismatch is reported") {
  std::mt19937_64 rng(1);
  const auto p = make_lstm_layer<double>("l", 3, 2, rng);
  const Tensor4<double> x(Shape4{1, 1, 1, 4});
  const Tensor4<double> h(Shape4{1, 1, 1, 2});
  CHECK_THROWS_AS(lstm_step(x, h, h, p), Error);
}

TEST_CASE("lstm gradients match finite differences") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 5; ++k) CHECK(gradcheck::lstm_step_trial(rng) < 1e-4);
  for (int k = 0; k < 3; ++k) CHECK(gradcheck::lstm_sequence_trial(rng) < 1e-4);
}

TEST_CASE("lstm_sequence: batch entries are independent") {
  std::mt19937_64 rng(3);
  const auto p = make_lstm_layer<double>("l", 2, 3, rng);
  std::vector<Tensor4<double>> both, first;
  for (int t = 0; t < 4; ++t) {
    const auto v = oracle::normal_values(4, rng);
    both.emplace_back(Shape4{2, 1, 1, 2}, v);
    first.emplace_back(Shape4{1, 1, 1, 2}, std::vector<double>(v.begin(), v.begin() + 2));
  }
  const auto a = lstm_sequence(both, p);
  const auto b = lstm_sequence(first, p);
  for (int t = 0; t < 4; ++t) {
    for (std::size_t u = 0; u < 3; ++u) CHECK(a.hidden[t][u] == b.hidden[t][u]);
  }
}

TEST_CASE("masked_mse: hand values and gradient") {
  const Tensor4<double> y(Shape4{1, 1, 2, 2}, {1, 2, 3, std::nan("")});
  const Tensor4<double> p(Shape4{1, 1, 2, 2}, {0, 2, 5, 9});
  const MaskTensor vm(Shape4{1, 1, 2, 2}, 1);
  const auto l = masked_mse(y, p, vm);
  CHECK(l.count == 3);
  CHECK(l.value == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(l.grad[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(l.grad[1] == 0.0);
  CHECK(l.grad[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(l.grad[3] == 0.0);
}

TEST_CASE("masked_mse: perfect prediction, single cell, empty mask") {
  std::mt19937_64 rng(4);
  const Tensor4<double> y(Shape4{2, 2, 2, 2}, oracle::normal_values(16, rng));
  MaskTensor vm(y.shape(), 1);
  CHECK(masked_mse(y, y, vm).value == 0.0);

  MaskTensor one(y.shape(), 0);
  one[5] = 1;
  auto p = y;
  p[5] += 0.5;
  p[6] += 100.0;
  CHECK(masked_mse(y, p, one).value == doctest::Approx(0.25).epsilon(1e-15));

  try {
    masked_mse(y, p, MaskTensor(y.shape(), 0));
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyMask);
  }
  CHECK_THROWS_AS(masked_mse(y, Tensor4<double>(Shape4{1, 2, 2, 2}), vm), Error);
}

TEST_CASE("masked_mse matches the loop oracle and its gradient") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape4 s{2, 3, 3, 2};
    auto yv = oracle::normal_values(s.size(), rng);
    yv[trial] = std::nan("");
    const Tensor4<double> y(s, yv);
    Tensor4<double> p(s, oracle::normal_values(s.size(), rng));
    MaskTensor vm(s);
    for (std::size_t k = 0; k < s.size(); ++k) vm[k] = (rng() % 3 != 0) ? 1 : 0;
    const auto l = masked_mse(y, p, vm);
    CHECK(l.value == doctest::Approx(oracle::masked_mse(y, p, vm)).epsilon(1e-12));
    const double err = oracle::check_gradient(p.values(), l.grad.values(),
                                              [&] { return masked_mse(y, p, vm).value; });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("adam: first step moves each parameter by lr against the gradient sign") {
  std::mt19937_64 rng(6);
  ParamSet<double> params{{make_dense_layer<double>("d", 3, 2, rng)}};
  const auto before = params;
  auto grads = params.zeros_like();
  grads.layers[0].weight.values = {0.5, -2.0, 1e-3, -1e-3, 7.0, -0.25};
  grads.layers[0].bias.values = {0.0, 3.0};
  AdamState<double> st;
  adam_step(params, grads, st);
  CHECK(st.step_count == 1);
  for (std::size_t k = 0; k < 6; ++k) {
    const double g = grads.layers[0].weight.values[k];
    const double expected = before.layers[0].weight.values[k] - 0.001 * g / (std::abs(g) + 1e-8);
    CHECK(params.layers[0].weight.values[k] == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(params.layers[0].bias.values[0] == before.layers[0].bias.values[0]);
}

TEST_CASE("adam minimizes a quadratic") {
  ParamSet<double> params{{LayerParams<double>{"q", LayerKind::kDense, {{1, 1}, {3.0}}, {}, {{1}, {-2.0}}}}};
  AdamState<double> st;
  st.lr = 0.05;
  for (int k = 0; k < 2000; ++k) {
    auto g = params.zeros_like();
    g.layers[0].weight.values[0] = 2.0 * (params.layers[0].weight.values[0] - 1.0);
    g.layers[0].bias.values[0] = 2.0 * (params.layers[0].bias.values[0] + 0.5);
    adam_step(params, g, st);
  }
  CHECK(params.layers[0].weight.values[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(params.layers[0].bias.values[0] == doctest::Approx(-0.5).epsilon(1e-3));
}
