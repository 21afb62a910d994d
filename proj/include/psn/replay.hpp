#pragma once

#include <cstddef>
#include <vector>

#include "psn/env.hpp"
#include "psn/rng.hpp"

namespace psn {

struct Transition {
  std::vector<double> state;
  env::Action action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  std::vector<char> head_mask;  // bootstrapped DQN only
};

// Fixed-capacity FIFO store with uniform sampling (with replacement).
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

  const Transition& operator[](std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

}  // namespace psn
