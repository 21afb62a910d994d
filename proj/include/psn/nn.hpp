#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace psn::nn {

// Batches are stored column-major: one column per sample.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, linear, softmax };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

inline constexpr double kLayerNormEps = 1e-5;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  Activation activation = Activation::linear;
  bool layer_norm = false;
  Vector gain;    // layer-norm gain (only when layer_norm)
  Vector shift;   // layer-norm bias (only when layer_norm)

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

enum class Tensor { weight, bias, gain, shift };

struct TensorSlot {
  std::size_t layer = 0;
  Tensor tensor = Tensor::weight;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool operator==(const TensorSlot&) const = default;
};

// Maps flat index ranges onto (layer, tensor). Weights are flattened row-major.
struct ParamLayout {
  std::vector<TensorSlot> slots;
  std::size_t size() const { return slots.empty() ? 0 : slots.back().offset + slots.back().size; }
  bool operator==(const ParamLayout&) const = default;
};

struct ParamVector {
  std::vector<double> values;
  ParamLayout layout;
  std::vector<char> perturbable;  // one flag per entry; noise touches only flagged entries

  std::size_t size() const { return values.size(); }
};

// Intermediates kept by a taped forward pass, consumed by backward().
struct ForwardTape {
  struct Layer {
    Matrix input;
    Matrix normalized;             // x-hat of layer norm
    Eigen::RowVectorXd inv_std;    // per-sample 1/sqrt(var + eps)
    Matrix output;                 // post-activation
  };
  std::vector<Layer> layers;
};

class Network {
public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  int input_dim() const;
  int output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> input) const;
  Matrix forward(const Matrix& inputs) const;
  Matrix forward(const Matrix& inputs, ForwardTape& tape) const;

  // Reverse pass for the scalar sum_b <output_grad[:, b], output[:, b]>.
  // Parameter gradients are written in layout order into *param_grad
  // (resized); the gradient with respect to the inputs into *input_grad.
  // Either pointer may be null.
  void backward(const ForwardTape& tape, const Matrix& output_grad,
                std::vector<double>* param_grad, Matrix* input_grad = nullptr) const;

  ParamLayout layout() const;
  std::size_t num_params() const;

  void copy_params_to(std::span<double> out) const;
  void load_params(std::span<const double> values);

private:
  std::vector<DenseLayer> layers_;
};

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;
  bool layer_norm = true;
};

// Layer norm goes on hidden pre-activations only. Weights and biases are drawn
// uniformly from +-1/sqrt(fan_in).
Network build_mlp(const MlpSpec& spec, std::uint64_t seed);
Network build_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  Activation hidden_activation, bool use_layer_norm, std::uint64_t seed,
                  Activation output_activation = Activation::linear);

// A stack whose every layer is treated as hidden (activation + optional norm),
// used as a shared feature trunk.
Network build_trunk(int input_dim, const std::vector<int>& hidden, Activation activation,
                    bool use_layer_norm, std::uint64_t seed);

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps = kLayerNormEps);

std::vector<double> softmax(std::span<const double> logits);

std::vector<double> forward(const Network& net, std::span<const double> input);

// d(output . output_grad)/d(theta) for a single input.
ParamVector backward_grads(const Network& net, std::span<const double> input,
                           std::span<const double> output_grad);

ParamVector get_flat_params(const Network& net);
void set_flat_params(Network& net, const ParamVector& params);

// target <- tau * source + (1 - tau) * target, tensor by tensor.
void soft_update(Network& target, const Network& source, double tau);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig config);

  // In-place bias-corrected Adam update.
  void step(std::span<double> params, std::span<const double> grads);

  std::size_t size() const { return first_moment_.size(); }
  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment() const { return first_moment_; }
  const std::vector<double>& second_moment() const { return second_moment_; }

private:
  AdamConfig config_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  std::uint64_t step_count_ = 0;
};

ParamVector adam_step(AdamState& state, ParamVector params, const ParamVector& grads);

// Convenience for optimisers owning a Network: one Adam step on its parameters.
void apply_adam(Network& net, AdamState& state, std::span<const double> grads);

Matrix to_column(std::span<const double> x);
Matrix stack_columns(const std::vector<std::vector<double>>& rows);

}  // namespace psn::nn
