#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gcrl::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { ReLU, Tanh, Identity };

// Shape-checked exact comparison; Eigen's operator== requires equal sizes.
template <typename A, typename B>
bool exactly_equal(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

template <typename T>
bool exactly_equal(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!exactly_equal(a[i], b[i])) return false;
  }
  return true;
}

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// One fully connected layer: y = act(W x + b), W is out x in.
struct DenseLayer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::Identity;

  Eigen::Index inputs() const { return weights.cols(); }
  Eigen::Index outputs() const { return weights.rows(); }
};

struct NetworkParams {
  std::vector<DenseLayer> layers;

  Eigen::Index input_size() const;
  Eigen::Index output_size() const;
  std::size_t parameter_count() const;
  std::vector<int> layer_sizes() const;

  // Throws ShapeError if adjacent layers do not chain or a bias length
  // disagrees with its weight matrix.
  void validate() const;

  bool all_finite() const;
  bool operator==(const NetworkParams& other) const;
};

// Gradients mirroring NetworkParams. `input` holds d/d(input) with one
// column per sample (a single column for the unbatched API).
struct GradientBundle {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  Matrix input;

  bool all_finite() const;
};

struct AdamState {
  std::vector<Matrix> first_moment_w;
  std::vector<Vector> first_moment_b;
  std::vector<Matrix> second_moment_w;
  std::vector<Vector> second_moment_b;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamState& other) const;
};

// Uniform fan-in initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
// zero biases. Deterministic for a fixed seed.
NetworkParams init_network(const std::vector<int>& layer_sizes,
                           const std::vector<Activation>& activations,
                           std::uint64_t seed);

AdamState make_adam(const NetworkParams& net, double learning_rate,
                    double beta1 = 0.9, double beta2 = 0.999,
                    double epsilon = 1e-8);

Vector forward(const NetworkParams& net, const Vector& input);

// Batched forward pass; inputs are columns.
Matrix forward_batch(const NetworkParams& net, const Matrix& inputs);

// Intermediate values of a batched forward pass, kept for backward.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to layer k
  std::vector<Matrix> activations;  // output of layer k (after activation)

  const Matrix& output() const { return activations.back(); }
};

ForwardCache forward_cached(const NetworkParams& net, const Matrix& inputs);

// Reverse-mode gradient of sum over columns of (upstream . output).
GradientBundle backward_batch(const NetworkParams& net,
                              const ForwardCache& cache,
                              const Matrix& upstream);

// Like backward_batch but only propagates to the network input; parameter
// gradients are left empty.
Matrix input_gradient(const NetworkParams& net, const ForwardCache& cache,
                      const Matrix& upstream);

GradientBundle backward(const NetworkParams& net, const Vector& input,
                        const Vector& upstream);

struct AdamResult {
  NetworkParams params;
  AdamState state;
};

// Bias-corrected Adam update. Throws NumericError (and changes nothing) on
// non-finite gradients.
AdamResult adam_step(const NetworkParams& net, const GradientBundle& grads,
                     const AdamState& opt);

// In-place variant used on the training hot path. Same semantics.
void adam_step_inplace(NetworkParams& net, const GradientBundle& grads,
                       AdamState& opt);

// Versioned JSON: {version, layer_sizes, activations, weights (row-major),
// biases}. Doubles are written in shortest round-trip form.
std::string to_json(const NetworkParams& net);
NetworkParams network_from_json(std::string_view text);

}  // namespace gcrl::nn
