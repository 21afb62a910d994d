#include "psn/replay.hpp"

#include <stdexcept>

namespace psn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.index(items_.size());
  return idx;
}

}  // namespace psn
