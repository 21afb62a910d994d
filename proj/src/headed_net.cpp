#include "psn/headed_net.hpp"

#include <algorithm>
#include <stdexcept>

namespace psn {

HeadedNet::HeadedNet(nn::Network trunk, std::vector<nn::Network> heads)
    : trunk_(std::move(trunk)), heads_(std::move(heads)) {
  if (heads_.empty()) throw std::invalid_argument("HeadedNet: needs at least one head");
  const int feature_dim = has_trunk() ? trunk_.output_dim() : heads_.front().input_dim();
  for (const auto& h : heads_)
    if (h.input_dim() != feature_dim)
      throw std::invalid_argument("HeadedNet: head input does not match trunk output");
}

HeadedNet::HeadedNet(nn::Network single) : HeadedNet(nn::Network{}, {std::move(single)}) {}

int HeadedNet::input_dim() const {
  return has_trunk() ? trunk_.input_dim() : heads_.front().input_dim();
}

std::size_t HeadedNet::num_params() const {
  std::size_t n = trunk_.num_params();
  for (const auto& h : heads_) n += h.num_params();
  return n;
}

std::size_t HeadedNet::head_offset(std::size_t i) const {
  std::size_t off = trunk_.num_params();
  for (std::size_t k = 0; k < i; ++k) off += heads_.at(k).num_params();
  return off;
}

std::vector<double> HeadedNet::params() const {
  std::vector<double> out(num_params());
  std::span<double> view(out);
  std::size_t off = trunk_.num_params();
  trunk_.copy_params_to(view.first(off));
  for (const auto& h : heads_) {
    h.copy_params_to(view.subspan(off, h.num_params()));
    off += h.num_params();
  }
  return out;
}

void HeadedNet::load(std::span<const double> values) {
  if (values.size() != num_params())
    throw std::invalid_argument("HeadedNet::load: expected " + std::to_string(num_params()) +
                                " values, got " + std::to_string(values.size()));
  std::size_t off = trunk_.num_params();
  if (has_trunk()) trunk_.load_params(values.first(off));
  for (auto& h : heads_) {
    h.load_params(values.subspan(off, h.num_params()));
    off += h.num_params();
  }
}

std::vector<char> HeadedNet::head_mask(std::size_t i) const {
  std::vector<char> mask(num_params(), 0);
  const std::size_t off = head_offset(i);
  std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(off), heads_.at(i).num_params(), 1);
  return mask;
}

nn::Matrix HeadedNet::features(const nn::Matrix& inputs) const {
  return has_trunk() ? trunk_.forward(inputs) : inputs;
}

nn::Matrix HeadedNet::head_output(std::size_t i, const nn::Matrix& inputs) const {
  return heads_.at(i).forward(features(inputs));
}

std::vector<nn::Matrix> HeadedNet::all_outputs(const nn::Matrix& inputs) const {
  const nn::Matrix f = features(inputs);
  std::vector<nn::Matrix> out;
  out.reserve(heads_.size());
  for (const auto& h : heads_) out.push_back(h.forward(f));
  return out;
}

void HeadedNet::forward(const nn::Matrix& inputs, Tape& tape) const {
  tape.features = has_trunk() ? trunk_.forward(inputs, tape.trunk) : inputs;
  tape.heads.resize(heads_.size());
  tape.outputs.resize(heads_.size());
  for (std::size_t i = 0; i < heads_.size(); ++i)
    tape.outputs[i] = heads_[i].forward(tape.features, tape.heads[i]);
}

std::vector<double> HeadedNet::backward(const Tape& tape, std::span<const HeadGradient> grads,
                                        double trunk_scale) const {
  if (grads.size() != heads_.size())
    throw std::invalid_argument("HeadedNet::backward: one gradient entry per head required");
  std::vector<double> flat(num_params(), 0.0);
  nn::Matrix feature_grad;
  std::vector<double> part;
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    if (grads[i].output_grad.size() == 0) continue;
    const bool to_trunk = has_trunk() && grads[i].through_trunk;
    nn::Matrix input_grad;
    heads_[i].backward(tape.heads[i], grads[i].output_grad, &part,
                       to_trunk ? &input_grad : nullptr);
    std::copy(part.begin(), part.end(),
              flat.begin() + static_cast<std::ptrdiff_t>(head_offset(i)));
    if (to_trunk) {
      if (feature_grad.size() == 0)
        feature_grad = std::move(input_grad);
      else
        feature_grad += input_grad;
    }
  }
  if (feature_grad.size() != 0) {
    feature_grad *= trunk_scale;
    trunk_.backward(tape.trunk, feature_grad, &part);
    std::copy(part.begin(), part.end(), flat.begin());
  }
  return flat;
}

}  // namespace psn
