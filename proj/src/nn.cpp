#include "psn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "psn/error.hpp"
#include "psn/rng.hpp"

namespace psn::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  if (name == "softmax") return Activation::softmax;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

namespace {

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::linear: break;
    case Activation::softmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        col.array() = (col.array() - col.maxCoeff()).exp();
        col /= col.sum();
      }
      break;
  }
}

// Layer norm over rows (features) of each column. Fills x-hat and inverse std.
Matrix normalize_columns(const Matrix& z, Matrix& xhat, Eigen::RowVectorXd& inv_std) {
  const double n = static_cast<double>(z.rows());
  Eigen::RowVectorXd mean = z.colwise().sum() / n;
  xhat = z.rowwise() - mean;
  Eigen::RowVectorXd var = xhat.array().square().colwise().sum() / n;
  inv_std = (var.array() + kLayerNormEps).rsqrt();
  xhat = xhat * inv_std.asDiagonal();
  return xhat;
}

}  // namespace

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("Network: needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() < 1 || l.weight.cols() < 1)
      throw std::invalid_argument("Network: layer " + std::to_string(i) + " has a zero dimension");
    if (l.bias.size() != l.weight.rows())
      throw std::invalid_argument("Network: bias size mismatch in layer " + std::to_string(i));
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim())
      throw std::invalid_argument("Network: layer " + std::to_string(i) +
                                  " input does not match previous output");
    if (l.layer_norm && (l.gain.size() != l.out_dim() || l.shift.size() != l.out_dim()))
      throw std::invalid_argument("Network: layer-norm parameters mismatch in layer " +
                                  std::to_string(i));
    if (!l.layer_norm && (l.gain.size() != 0 || l.shift.size() != 0))
      throw std::invalid_argument("Network: layer-norm parameters on a non-normalised layer");
  }
}

int Network::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().in_dim());
}

int Network::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().out_dim());
}

std::vector<double> Network::forward(std::span<const double> input) const {
  Matrix out = forward(to_column(input));
  return {out.data(), out.data() + out.size()};
}

Matrix Network::forward(const Matrix& inputs) const {
  if (inputs.rows() != input_dim())
    throw std::invalid_argument("forward: expected input dim " + std::to_string(input_dim()) +
                                ", got " + std::to_string(inputs.rows()));
  check_finite(inputs, "forward input");
  Matrix a = inputs;
  Matrix xhat;
  Eigen::RowVectorXd inv_std;
  for (const auto& l : layers_) {
    Matrix z = (l.weight * a).colwise() + l.bias;
    if (l.layer_norm) {
      normalize_columns(z, xhat, inv_std);
      z = (xhat.array().colwise() * l.gain.array()).colwise() + l.shift.array();
    }
    apply_activation(l.activation, z);
    a = std::move(z);
  }
  return a;
}

Matrix Network::forward(const Matrix& inputs, ForwardTape& tape) const {
  if (inputs.rows() != input_dim())
    throw std::invalid_argument("forward: expected input dim " + std::to_string(input_dim()) +
                                ", got " + std::to_string(inputs.rows()));
  check_finite(inputs, "forward input");
  tape.layers.resize(layers_.size());
  const Matrix* a = &inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    auto& t = tape.layers[i];
    t.input = *a;
    Matrix z = (l.weight * t.input).colwise() + l.bias;
    if (l.layer_norm) {
      normalize_columns(z, t.normalized, t.inv_std);
      z = (t.normalized.array().colwise() * l.gain.array()).colwise() + l.shift.array();
    }
    apply_activation(l.activation, z);
    t.output = std::move(z);
    a = &t.output;
  }
  return tape.layers.back().output;
}

void Network::backward(const ForwardTape& tape, const Matrix& output_grad,
                       std::vector<double>* param_grad, Matrix* input_grad) const {
  if (tape.layers.size() != layers_.size())
    throw std::invalid_argument("backward: tape does not belong to this network");
  const auto& last = tape.layers.back().output;
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols())
    throw std::invalid_argument("backward: output gradient shape mismatch");

  std::size_t offset = 0;
  if (param_grad) {
    param_grad->assign(num_params(), 0.0);
    offset = param_grad->size();
  }

  Matrix grad = output_grad;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const auto& l = layers_[idx];
    const auto& t = tape.layers[idx];

    switch (l.activation) {
      case Activation::relu: grad = (t.output.array() > 0.0).select(grad, 0.0); break;
      case Activation::tanh: grad.array() *= 1.0 - t.output.array().square(); break;
      case Activation::linear: break;
      case Activation::softmax: {
        Eigen::RowVectorXd dot = grad.cwiseProduct(t.output).colwise().sum();
        grad = t.output.cwiseProduct(grad.rowwise() - dot);
        break;
      }
    }

    // grad now holds d/d(post-norm pre-activation).
    Vector d_gain, d_shift;
    if (l.layer_norm) {
      d_gain = grad.cwiseProduct(t.normalized).rowwise().sum();
      d_shift = grad.rowwise().sum();
      const double n = static_cast<double>(l.out_dim());
      Matrix dxhat = grad.array().colwise() * l.gain.array();
      Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
      Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(t.normalized).colwise().sum();
      grad = (n * dxhat).rowwise() - sum_d;
      grad -= t.normalized * sum_dx.asDiagonal();
      grad = grad * (t.inv_std / n).asDiagonal();
    }

    if (param_grad) {
      const std::size_t w_size = static_cast<std::size_t>(l.weight.size());
      const std::size_t b_size = static_cast<std::size_t>(l.bias.size());
      const std::size_t n_size = l.layer_norm ? 2 * static_cast<std::size_t>(l.out_dim()) : 0;
      offset -= w_size + b_size + n_size;
      double* dst = param_grad->data() + offset;
      Matrix d_weight = grad * t.input.transpose();
      for (Eigen::Index r = 0; r < d_weight.rows(); ++r)
        for (Eigen::Index c = 0; c < d_weight.cols(); ++c) *dst++ = d_weight(r, c);
      Vector d_bias = grad.rowwise().sum();
      for (Eigen::Index r = 0; r < d_bias.size(); ++r) *dst++ = d_bias[r];
      if (l.layer_norm) {
        for (Eigen::Index r = 0; r < d_gain.size(); ++r) *dst++ = d_gain[r];
        for (Eigen::Index r = 0; r < d_shift.size(); ++r) *dst++ = d_shift[r];
      }
    }

    if (idx > 0 || input_grad) grad = l.weight.transpose() * grad;
  }

  if (param_grad) {
    for (double g : *param_grad)
      if (!std::isfinite(g)) throw NumericError("backward: non-finite gradient");
  }
  if (input_grad) {
    check_finite(grad, "backward input gradient");
    *input_grad = std::move(grad);
  }
}

ParamLayout Network::layout() const {
  ParamLayout layout;
  std::size_t offset = 0;
  auto add = [&](std::size_t layer, Tensor tensor, std::size_t size) {
    layout.slots.push_back({layer, tensor, offset, size});
    offset += size;
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    add(i, Tensor::weight, static_cast<std::size_t>(l.weight.size()));
    add(i, Tensor::bias, static_cast<std::size_t>(l.bias.size()));
    if (l.layer_norm) {
      add(i, Tensor::gain, static_cast<std::size_t>(l.gain.size()));
      add(i, Tensor::shift, static_cast<std::size_t>(l.shift.size()));
    }
  }
  return layout;
}

std::size_t Network::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    if (l.layer_norm) n += static_cast<std::size_t>(l.gain.size() + l.shift.size());
  }
  return n;
}

void Network::copy_params_to(std::span<double> out) const {
  if (out.size() != num_params()) throw std::invalid_argument("copy_params_to: size mismatch");
  double* dst = out.data();
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) *dst++ = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) *dst++ = l.bias[r];
    if (l.layer_norm) {
      for (Eigen::Index r = 0; r < l.gain.size(); ++r) *dst++ = l.gain[r];
      for (Eigen::Index r = 0; r < l.shift.size(); ++r) *dst++ = l.shift[r];
    }
  }
}

void Network::load_params(std::span<const double> values) {
  if (values.size() != num_params())
    throw std::invalid_argument("load_params: expected " + std::to_string(num_params()) +
                                " values, got " + std::to_string(values.size()));
  const double* src = values.data();
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = *src++;
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = *src++;
    if (l.layer_norm) {
      for (Eigen::Index r = 0; r < l.gain.size(); ++r) l.gain[r] = *src++;
      for (Eigen::Index r = 0; r < l.shift.size(); ++r) l.shift[r] = *src++;
    }
  }
}

namespace {

DenseLayer init_layer(int in, int out, Rng& rng) {
  DenseLayer l;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.weight.resize(out, in);
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-bound, bound);
  l.bias.resize(out);
  for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = rng.uniform(-bound, bound);
  return l;
}

void enable_layer_norm(DenseLayer& l) {
  l.layer_norm = true;
  l.gain = Vector::Ones(l.out_dim());
  l.shift = Vector::Zero(l.out_dim());
}

}  // namespace

Network build_trunk(int input_dim, const std::vector<int>& hidden, Activation activation,
                    bool use_layer_norm, std::uint64_t seed) {
  if (input_dim < 1 || hidden.empty())
    throw std::invalid_argument("build_trunk: needs a positive input and at least one layer");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  int in = input_dim;
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("build_trunk: hidden sizes must be positive");
    DenseLayer l = init_layer(in, h, rng);
    l.activation = activation;
    if (use_layer_norm) enable_layer_norm(l);
    layers.push_back(std::move(l));
    in = h;
  }
  return Network(std::move(layers));
}

Network build_mlp(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("build_mlp: dimensions must be positive");
  for (int h : spec.hidden)
    if (h < 1) throw std::invalid_argument("build_mlp: hidden sizes must be positive");

  Rng rng(seed);
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);

  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool hidden = i + 2 < dims.size();
    DenseLayer l = init_layer(dims[i], dims[i + 1], rng);
    l.activation = hidden ? spec.hidden_activation : spec.output_activation;
    if (hidden && spec.layer_norm) enable_layer_norm(l);
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

Network build_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  Activation hidden_activation, bool use_layer_norm, std::uint64_t seed,
                  Activation output_activation) {
  return build_mlp(MlpSpec{input_dim, hidden, output_dim, hidden_activation, output_activation,
                           use_layer_norm},
                   seed);
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  if (x.size() != gain.size() || x.size() != bias.size())
    throw std::invalid_argument("layer_norm: length mismatch");
  if (x.empty()) throw std::invalid_argument("layer_norm: empty input");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * (x[i] - mean) * inv_std + bias[i];
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> forward(const Network& net, std::span<const double> input) {
  return net.forward(input);
}

ParamVector backward_grads(const Network& net, std::span<const double> input,
                           std::span<const double> output_grad) {
  if (output_grad.size() != static_cast<std::size_t>(net.output_dim()))
    throw std::invalid_argument("backward_grads: output gradient length mismatch");
  ForwardTape tape;
  net.forward(to_column(input), tape);
  ParamVector g;
  g.layout = net.layout();
  net.backward(tape, to_column(output_grad), &g.values);
  g.perturbable.assign(g.values.size(), 1);
  return g;
}

ParamVector get_flat_params(const Network& net) {
  ParamVector p;
  p.layout = net.layout();
  p.values.resize(net.num_params());
  net.copy_params_to(p.values);
  p.perturbable.assign(p.values.size(), 1);
  return p;
}

void set_flat_params(Network& net, const ParamVector& params) {
  if (!(params.layout == net.layout()))
    throw std::invalid_argument("set_flat_params: layout does not match network");
  net.load_params(params.values);
}

void soft_update(Network& target, const Network& source, double tau) {
  if (!(target.layout() == source.layout()))
    throw std::invalid_argument("soft_update: networks have different layouts");
  if (tau == 1.0) {
    target = source;
    return;
  }
  if (tau == 0.0) return;
  std::vector<double> t(target.num_params()), s(source.num_params());
  target.copy_params_to(t);
  source.copy_params_to(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
  target.load_params(t);
}

AdamState::AdamState(std::size_t n, AdamConfig config)
    : config_(config), first_moment_(n, 0.0), second_moment_(n, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != first_moment_.size() || grads.size() != first_moment_.size())
    throw std::invalid_argument("adam: length mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
  ++step_count_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * grads[i];
    second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = first_moment_[i] / c1;
    const double v_hat = second_moment_[i] / c2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

ParamVector adam_step(AdamState& state, ParamVector params, const ParamVector& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: length mismatch");
  state.step(params.values, grads.values);
  return params;
}

void apply_adam(Network& net, AdamState& state, std::span<const double> grads) {
  std::vector<double> p(net.num_params());
  net.copy_params_to(p);
  state.step(p, grads);
  net.load_params(p);
}

Matrix to_column(std::span<const double> x) {
  Matrix m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return m;
}

Matrix stack_columns(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != rows.front().size())
      throw std::invalid_argument("stack_columns: ragged input");
    for (std::size_t r = 0; r < rows[c].size(); ++r)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
  }
  return m;
}

}  // namespace psn::nn
