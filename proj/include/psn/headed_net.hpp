#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psn/nn.hpp"

namespace psn {

// An optional shared trunk feeding independent heads. The flat parameter
// vector holds the trunk first, then each head in index order.
class HeadedNet {
public:
  struct Tape {
    nn::ForwardTape trunk;
    nn::Matrix features;
    std::vector<nn::ForwardTape> heads;
    std::vector<nn::Matrix> outputs;
  };

  // Gradient of the loss with respect to one head's output. An empty matrix
  // means the head does not contribute.
  struct HeadGradient {
    nn::Matrix output_grad;
    bool through_trunk = true;
  };

  HeadedNet() = default;
  HeadedNet(nn::Network trunk, std::vector<nn::Network> heads);
  explicit HeadedNet(nn::Network single);

  bool has_trunk() const { return !trunk_.layers().empty(); }
  const nn::Network& trunk() const { return trunk_; }
  std::size_t num_heads() const { return heads_.size(); }
  const nn::Network& head(std::size_t i) const { return heads_.at(i); }
  int input_dim() const;

  std::size_t num_params() const;
  std::size_t trunk_params() const { return trunk_.num_params(); }
  std::size_t head_offset(std::size_t i) const;

  std::vector<double> params() const;
  void load(std::span<const double> values);

  // Perturbation mask covering only head i.
  std::vector<char> head_mask(std::size_t i) const;

  nn::Matrix features(const nn::Matrix& inputs) const;
  nn::Matrix head_output(std::size_t i, const nn::Matrix& inputs) const;
  std::vector<nn::Matrix> all_outputs(const nn::Matrix& inputs) const;

  void forward(const nn::Matrix& inputs, Tape& tape) const;

  // Flat gradient. Feature gradients from heads marked through_trunk are
  // summed, multiplied by trunk_scale, and sent through the trunk.
  std::vector<double> backward(const Tape& tape, std::span<const HeadGradient> grads,
                               double trunk_scale = 1.0) const;

private:
  nn::Network trunk_;
  std::vector<nn::Network> heads_;
};

}  // namespace psn
