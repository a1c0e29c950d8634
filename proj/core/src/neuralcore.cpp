#include "gcrl/neuralcore.hpp"

#include <cmath>
#include <random>

#include "gcrl/errors.hpp"
#include "json_io.hpp"

namespace gcrl::nn {

namespace {

constexpr int kFormatVersion = 1;

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::ReLU:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::Identity:
      break;
  }
}

// d act / d z expressed through the activation output a.
void scale_by_derivative(Activation act, const Matrix& a, Matrix& grad) {
  switch (act) {
    case Activation::ReLU:
      grad = (a.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::Tanh:
      grad.array() *= (1.0 - a.array().square());
      break;
    case Activation::Identity:
      break;
  }
}

void check_input(const NetworkParams& net, Eigen::Index rows) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (rows != net.input_size()) {
    throw ShapeError("input length " + std::to_string(rows) +
                     " does not match network input size " +
                     std::to_string(net.input_size()));
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Eigen::Index NetworkParams::input_size() const {
  return layers.empty() ? 0 : layers.front().inputs();
}

Eigen::Index NetworkParams::output_size() const {
  return layers.empty() ? 0 : layers.back().outputs();
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  return n;
}

std::vector<int> NetworkParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers.front().inputs()));
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.outputs()));
  return sizes;
}

void NetworkParams::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.size() != l.outputs()) {
      throw ShapeError("layer " + std::to_string(k) +
                       ": bias length does not match weight rows");
    }
    if (k + 1 < layers.size() && layers[k + 1].inputs() != l.outputs()) {
      throw ShapeError("layer " + std::to_string(k) + " output size " +
                       std::to_string(l.outputs()) +
                       " does not chain into layer " + std::to_string(k + 1));
    }
  }
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.activation != b.activation) return false;
    if (!exactly_equal(a.weights, b.weights) || !exactly_equal(a.bias, b.bias))
      return false;
  }
  return true;
}

bool GradientBundle::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : bias) {
    if (!b.allFinite()) return false;
  }
  return input.allFinite();
}

bool AdamState::operator==(const AdamState& o) const {
  return exactly_equal(first_moment_w, o.first_moment_w) &&
         exactly_equal(first_moment_b, o.first_moment_b) &&
         exactly_equal(second_moment_w, o.second_moment_w) &&
         exactly_equal(second_moment_b, o.second_moment_b) &&
         step_count == o.step_count &&
         learning_rate == o.learning_rate && beta1 == o.beta1 &&
         beta2 == o.beta2 && epsilon == o.epsilon;
}

NetworkParams init_network(const std::vector<int>& layer_sizes,
                           const std::vector<Activation>& activations,
                           std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("need at least an input and an output size");
  }
  if (activations.size() != layer_sizes.size() - 1) {
    throw ConfigError("expected " + std::to_string(layer_sizes.size() - 1) +
                      " activations, got " +
                      std::to_string(activations.size()));
  }
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer sizes must be >= 1");
  }

  std::mt19937_64 rng(seed);
  NetworkParams net;
  net.layers.reserve(activations.size());
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    // Row-major draw order so the sequence matches the serialized layout.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(fan_out);
    layer.activation = activations[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

AdamState make_adam(const NetworkParams& net, double learning_rate,
                    double beta1, double beta2, double epsilon) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  AdamState opt;
  opt.learning_rate = learning_rate;
  opt.beta1 = beta1;
  opt.beta2 = beta2;
  opt.epsilon = epsilon;
  for (const auto& l : net.layers) {
    opt.first_moment_w.push_back(Matrix::Zero(l.outputs(), l.inputs()));
    opt.second_moment_w.push_back(Matrix::Zero(l.outputs(), l.inputs()));
    opt.first_moment_b.push_back(Vector::Zero(l.outputs()));
    opt.second_moment_b.push_back(Vector::Zero(l.outputs()));
  }
  return opt;
}

Vector forward(const NetworkParams& net, const Vector& input) {
  check_input(net, input.size());
  Matrix x = input;
  for (const auto& l : net.layers) {
    Matrix z = l.weights * x;
    z.colwise() += l.bias;
    apply_activation(l.activation, z);
    x = std::move(z);
  }
  return x.col(0);
}

Matrix forward_batch(const NetworkParams& net, const Matrix& inputs) {
  check_input(net, inputs.rows());
  Matrix x = inputs;
  for (const auto& l : net.layers) {
    Matrix z = l.weights * x;
    z.colwise() += l.bias;
    apply_activation(l.activation, z);
    x = std::move(z);
  }
  return x;
}

ForwardCache forward_cached(const NetworkParams& net, const Matrix& inputs) {
  check_input(net, inputs.rows());
  ForwardCache cache;
  cache.inputs.reserve(net.layers.size());
  cache.activations.reserve(net.layers.size());
  const Matrix* x = &inputs;
  for (const auto& l : net.layers) {
    cache.inputs.push_back(*x);
    Matrix z = l.weights * cache.inputs.back();
    z.colwise() += l.bias;
    apply_activation(l.activation, z);
    cache.activations.push_back(std::move(z));
    x = &cache.activations.back();
  }
  return cache;
}

GradientBundle backward_batch(const NetworkParams& net,
                              const ForwardCache& cache,
                              const Matrix& upstream) {
  if (cache.activations.size() != net.layers.size()) {
    throw ShapeError("forward cache does not match network depth");
  }
  const Matrix& out = cache.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  const std::size_t depth = net.layers.size();
  GradientBundle g;
  g.weights.resize(depth);
  g.bias.resize(depth);
  Matrix delta = upstream;
  for (std::size_t i = depth; i-- > 0;) {
    const auto& l = net.layers[i];
    scale_by_derivative(l.activation, cache.activations[i], delta);
    g.weights[i].noalias() = delta * cache.inputs[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    Matrix next = l.weights.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

Matrix input_gradient(const NetworkParams& net, const ForwardCache& cache,
                      const Matrix& upstream) {
  if (cache.activations.size() != net.layers.size()) {
    throw ShapeError("forward cache does not match network depth");
  }
  const Matrix& out = cache.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  Matrix delta = upstream;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    scale_by_derivative(l.activation, cache.activations[i], delta);
    Matrix next = l.weights.transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

GradientBundle backward(const NetworkParams& net, const Vector& input,
                        const Vector& upstream) {
  ForwardCache cache = forward_cached(net, input);
  return backward_batch(net, cache, upstream);
}

void adam_step_inplace(NetworkParams& net, const GradientBundle& grads,
                       AdamState& opt) {
  const std::size_t depth = net.layers.size();
  if (grads.weights.size() != depth || grads.bias.size() != depth ||
      opt.first_moment_w.size() != depth || opt.second_moment_w.size() != depth ||
      opt.first_moment_b.size() != depth || opt.second_moment_b.size() != depth) {
    throw ShapeError("gradient/optimizer depth does not match network");
  }
  for (std::size_t k = 0; k < depth; ++k) {
    const auto& l = net.layers[k];
    const auto same = [&](const Matrix& m) {
      return m.rows() == l.weights.rows() && m.cols() == l.weights.cols();
    };
    if (!same(grads.weights[k]) || !same(opt.first_moment_w[k]) ||
        !same(opt.second_moment_w[k]) || grads.bias[k].size() != l.bias.size() ||
        opt.first_moment_b[k].size() != l.bias.size() ||
        opt.second_moment_b[k].size() != l.bias.size()) {
      throw ShapeError("gradient/optimizer shape mismatch at layer " +
                       std::to_string(k));
    }
  }
  for (std::size_t k = 0; k < depth; ++k) {
    if (!grads.weights[k].allFinite() || !grads.bias[k].allFinite()) {
      throw NumericError("non-finite gradient at layer " + std::to_string(k));
    }
  }

  const std::int64_t t = opt.step_count + 1;
  const double b1 = opt.beta1;
  const double b2 = opt.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double step = opt.learning_rate * std::sqrt(correction2) / correction1;
  const double eps_hat = opt.epsilon * std::sqrt(correction2);

  for (std::size_t k = 0; k < depth; ++k) {
    auto& l = net.layers[k];
    opt.first_moment_w[k] = b1 * opt.first_moment_w[k] + (1.0 - b1) * grads.weights[k];
    opt.second_moment_w[k] =
        b2 * opt.second_moment_w[k] +
        (1.0 - b2) * grads.weights[k].cwiseProduct(grads.weights[k]);
    opt.first_moment_b[k] = b1 * opt.first_moment_b[k] + (1.0 - b1) * grads.bias[k];
    opt.second_moment_b[k] = b2 * opt.second_moment_b[k] +
                             (1.0 - b2) * grads.bias[k].cwiseProduct(grads.bias[k]);
    l.weights.array() -= step * opt.first_moment_w[k].array() /
                         (opt.second_moment_w[k].array().sqrt() + eps_hat);
    l.bias.array() -= step * opt.first_moment_b[k].array() /
                      (opt.second_moment_b[k].array().sqrt() + eps_hat);
  }
  opt.step_count = t;
}

AdamResult adam_step(const NetworkParams& net, const GradientBundle& grads,
                     const AdamState& opt) {
  AdamResult r{net, opt};
  adam_step_inplace(r.params, grads, r.state);
  return r;
}

std::string to_json(const NetworkParams& net) {
  return detail::network_to_json(net).dump();
}

NetworkParams network_from_json(std::string_view text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const detail::Json::exception& e) {
    throw ParseError("network", e.what());
  }
  return detail::network_from_json(j);
}

}  // namespace gcrl::nn

namespace gcrl::detail {

namespace {

Json matrix_rows(const nn::Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

nn::Matrix matrix_from_flat(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw ShapeError("expected " + std::to_string(rows * cols) +
                     " values, got " + std::to_string(flat.size()));
  }
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return m;
}

Json vector_json(const nn::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nn::Vector vector_from_json(const Json& j, Eigen::Index n) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != n) {
    throw ShapeError("expected " + std::to_string(n) + " values, got " +
                     std::to_string(flat.size()));
  }
  return Eigen::Map<const nn::Vector>(flat.data(), n);
}

}  // namespace

Json network_to_json(const nn::NetworkParams& net) {
  Json j;
  j["version"] = nn::kFormatVersion;
  j["layer_sizes"] = net.layer_sizes();
  Json acts = Json::array();
  Json weights = Json::array();
  Json biases = Json::array();
  for (const auto& l : net.layers) {
    acts.push_back(std::string(nn::to_string(l.activation)));
    weights.push_back(matrix_rows(l.weights));
    biases.push_back(vector_json(l.bias));
  }
  j["activations"] = std::move(acts);
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

nn::NetworkParams network_from_json(const Json& j) {
  return parse_section("network", [&] {
    if (j.at("version").get<int>() != nn::kFormatVersion) {
      throw ParseError("network", "unsupported version " + j.at("version").dump());
    }
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto& acts = j.at("activations");
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (sizes.size() < 2 || acts.size() != sizes.size() - 1 ||
        weights.size() != acts.size() || biases.size() != acts.size()) {
      throw ParseError("network", "inconsistent layer counts");
    }
    nn::NetworkParams net;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      nn::DenseLayer l;
      l.activation = nn::activation_from_string(acts[k].get<std::string>());
      l.weights = matrix_from_flat(weights[k], sizes[k + 1], sizes[k]);
      l.bias = vector_from_json(biases[k], sizes[k + 1]);
      net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
  });
}

Json adam_to_json(const nn::AdamState& opt) {
  Json j;
  j["step_count"] = opt.step_count;
  j["learning_rate"] = opt.learning_rate;
  j["beta1"] = opt.beta1;
  j["beta2"] = opt.beta2;
  j["epsilon"] = opt.epsilon;
  Json layers = Json::array();
  for (std::size_t k = 0; k < opt.first_moment_w.size(); ++k) {
    Json l;
    l["rows"] = opt.first_moment_w[k].rows();
    l["cols"] = opt.first_moment_w[k].cols();
    l["m_w"] = matrix_rows(opt.first_moment_w[k]);
    l["v_w"] = matrix_rows(opt.second_moment_w[k]);
    l["m_b"] = vector_json(opt.first_moment_b[k]);
    l["v_b"] = vector_json(opt.second_moment_b[k]);
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

nn::AdamState adam_from_json(const Json& j) {
  nn::AdamState opt;
  opt.step_count = j.at("step_count").get<std::int64_t>();
  opt.learning_rate = j.at("learning_rate").get<double>();
  opt.beta1 = j.at("beta1").get<double>();
  opt.beta2 = j.at("beta2").get<double>();
  opt.epsilon = j.at("epsilon").get<double>();
  for (const auto& l : j.at("layers")) {
    const auto rows = l.at("rows").get<Eigen::Index>();
    const auto cols = l.at("cols").get<Eigen::Index>();
    opt.first_moment_w.push_back(matrix_from_flat(l.at("m_w"), rows, cols));
    opt.second_moment_w.push_back(matrix_from_flat(l.at("v_w"), rows, cols));
    opt.first_moment_b.push_back(vector_from_json(l.at("m_b"), rows));
    opt.second_moment_b.push_back(vector_from_json(l.at("v_b"), rows));
  }
  return opt;
}

}  // namespace gcrl::detail
