#include <doctest.h>

#include <random>

#include "gcrl/errors.hpp"
#include "gcrl/neuralcore.hpp"
#include "support/oracles.hpp"

using namespace gcrl;
using namespace gcrl::nn;

TEST_CASE("forward matches a plain loop implementation") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = oracle::random_small_network(rng);
    const Vector x = Vector::Random(net.input_size());
    const Vector got = forward(net, x);
    const Vector want = oracle::naive_forward(net, x);
    REQUIRE(got.size() == want.size());
    for (Eigen::Index i = 0; i < got.size(); ++i) CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-12));
  }
}

TEST_CASE("batched forward equals per-column forward") {
  const auto net = init_network({5, 7, 3}, {Activation::ReLU, Activation::Tanh}, 4);
  const Matrix x = Matrix::Random(5, 9);
  const Matrix y = forward_batch(net, x);
  for (int c = 0; c < 9; ++c) CHECK((y.col(c) - forward(net, x.col(c))).norm() < 1e-14);
}

TEST_CASE("backward matches central differences on random small networks") {
  std::mt19937_64 rng(20);
  int checked = 0;
  while (checked < 100) {
    const auto net = oracle::random_small_network(rng);
    const Vector x = Vector::Random(net.input_size());
    if (oracle::min_relu_margin(net, x) < 1e-3) continue;
    const Vector up = Vector::Random(net.output_size());
    const auto g = backward(net, x, up);
    const auto fd = oracle::central_differences(net, x, up, 1e-5);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      for (Eigen::Index i = 0; i < g.weights[k].size(); ++i)
        REQUIRE(oracle::grad_close(g.weights[k].data()[i], fd.weights[k].data()[i]));
      for (Eigen::Index i = 0; i < g.bias[k].size(); ++i)
        REQUIRE(oracle::grad_close(g.bias[k](i), fd.bias[k](i)));
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) REQUIRE(oracle::grad_close(g.input(i), fd.input(i)));
    ++checked;
  }
}

TEST_CASE("batched backward sums per-sample gradients") {
  const auto net = init_network({4, 6, 2}, {Activation::Tanh, Activation::Identity}, 9);
  const Matrix x = Matrix::Random(4, 5);
  const Matrix up = Matrix::Random(2, 5);
  const auto gb = backward_batch(net, forward_cached(net, x), up);
  Matrix w0 = Matrix::Zero(6, 4);
  for (int c = 0; c < 5; ++c) {
    const auto g = backward(net, x.col(c), up.col(c));
    w0 += g.weights[0];
    CHECK((gb.input.col(c) - g.input).norm() < 1e-13);
  }
  CHECK((gb.weights[0] - w0).norm() < 1e-12);
  CHECK((input_gradient(net, forward_cached(net, x), up) - gb.input).norm() < 1e-13);
}

TEST_CASE("shape mismatches are errors") {
  const auto net = init_network({3, 4, 2}, {Activation::ReLU, Activation::Identity}, 1);
  CHECK_THROWS_AS(forward(net, Vector::Zero(4)), ShapeError);
  CHECK_THROWS_AS(forward_batch(net, Matrix::Zero(2, 3)), ShapeError);
  CHECK_THROWS_AS(backward(net, Vector::Zero(3), Vector::Zero(3)), ShapeError);

  auto broken = net;
  broken.layers[1].weights = Matrix::Zero(2, 5);
  CHECK_THROWS_AS(broken.validate(), ShapeError);
  broken = net;
  broken.layers[0].bias = Vector::Zero(3);
  CHECK_THROWS_AS(broken.validate(), ShapeError);

  CHECK_THROWS_AS(init_network({3, 4}, {Activation::ReLU, Activation::ReLU}, 1), ConfigError);
  CHECK_THROWS_AS(init_network({3}, {}, 1), ConfigError);
  CHECK_THROWS_AS(activation_from_string("softmax"), ConfigError);
}

TEST_CASE("initialization is fan-in uniform with zero bias and seeded") {
  const auto a = init_network({16, 32, 4}, {Activation::ReLU, Activation::Tanh}, 77);
  const auto b = init_network({16, 32, 4}, {Activation::ReLU, Activation::Tanh}, 77);
  const auto c = init_network({16, 32, 4}, {Activation::ReLU, Activation::Tanh}, 78);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.layers[0].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(16.0));
  CHECK(a.layers[1].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(32.0));
  CHECK(a.layers[0].bias.isZero(0.0));
  CHECK(a.parameter_count() == 16 * 32 + 32 + 32 * 4 + 4);
  CHECK(a.layer_sizes() == std::vector<int>{16, 32, 4});
}

TEST_CASE("adam step matches a scalar reference") {
  auto net = init_network({2, 1}, {Activation::Identity}, 3);
  auto opt = make_adam(net, 0.01);
  GradientBundle g;
  g.weights = {Matrix::Constant(1, 2, 0.5)};
  g.bias = {Vector::Constant(1, -2.0)};

  double w = net.layers[0].weights(0, 0), m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    const auto r = adam_step(net, g, opt);
    net = r.params;
    opt = r.state;
    m = 0.9 * m + 0.1 * 0.5;
    v = 0.999 * v + 0.001 * 0.25;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(net.layers[0].weights(0, 0) == doctest::Approx(w).epsilon(1e-14));
  }
  CHECK(opt.step_count == 3);
}

TEST_CASE("adam rejects non-finite gradients without side effects") {
  auto net = init_network({2, 2}, {Activation::Identity}, 3);
  auto opt = make_adam(net, 0.01);
  GradientBundle g;
  g.weights = {Matrix::Zero(2, 2)};
  g.bias = {Vector::Zero(2)};
  g.weights[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto net0 = net;
  const auto opt0 = opt;
  CHECK_THROWS_AS(adam_step(net, g, opt), NumericError);
  CHECK_THROWS_AS(adam_step_inplace(net, g, opt), NumericError);
  CHECK(net == net0);
  CHECK(opt == opt0);
}

TEST_CASE("in-place and pure adam agree bit for bit") {
  auto net = init_network({3, 5, 1}, {Activation::ReLU, Activation::Identity}, 8);
  auto opt = make_adam(net, 1e-3);
  auto net2 = net;
  auto opt2 = opt;
  const Matrix x = Matrix::Random(3, 7);
  for (int i = 0; i < 5; ++i) {
    const auto g = backward_batch(net, forward_cached(net, x), Matrix::Ones(1, 7));
    const auto r = adam_step(net, g, opt);
    adam_step_inplace(net2, g, opt2);
    net = r.params;
    opt = r.state;
  }
  CHECK(net == net2);
  CHECK(opt == opt2);
}

TEST_CASE("network JSON round-trips exactly") {
  auto net = init_network({3, 4, 2}, {Activation::ReLU, Activation::Tanh}, 5);
  net.layers[0].bias(1) = 0.1 + 0.2;
  net.layers[1].weights(0, 0) = 1e-300;
  net.layers[1].weights(1, 3) = -std::nextafter(1.0, 2.0);
  const auto back = network_from_json(to_json(net));
  CHECK(back == net);
  CHECK(to_json(back) == to_json(net));
}

TEST_CASE("malformed network JSON is a parse error") {
  const auto net = init_network({2, 2}, {Activation::Identity}, 5);
  std::string text = to_json(net);
  CHECK_THROWS_AS(network_from_json(text.substr(0, text.size() / 2)), ParseError);
  CHECK_THROWS_AS(network_from_json(R"({"version": 99})"), ParseError);
  CHECK_THROWS_AS(network_from_json(R"({"version":1,"layer_sizes":[2,2],"activations":["identity"],"weights":[[1,2,3]],"biases":[[0,0]]})"),
                  gcrl::Error);
}
