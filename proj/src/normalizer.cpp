#include "psn/normalizer.hpp"

#include <cmath>
#include <stdexcept>

namespace psn {

OnlineNormalizer::OnlineNormalizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

void OnlineNormalizer::update(std::span<const double> x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("OnlineNormalizer: dim mismatch");
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    mean_[i] += d / n;
    m2_[i] += d * (x[i] - mean_[i]);
  }
}

std::vector<double> OnlineNormalizer::variance() const {
  std::vector<double> v(mean_.size(), 0.0);
  if (count_ == 0) return v;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(count_);
  return v;
}

std::vector<double> OnlineNormalizer::normalize(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("OnlineNormalizer: dim mismatch");
  if (count_ == 0) return {x.begin(), x.end()};
  std::vector<double> out(x.size());
  const auto var = variance();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean_[i]) / std::sqrt(var[i] + kEps);
  return out;
}

void OnlineNormalizer::restore(std::uint64_t count, std::vector<double> mean,
                               std::span<const double> variance) {
  if (variance.size() != mean.size()) throw std::invalid_argument("OnlineNormalizer: dim mismatch");
  count_ = count;
  mean_ = std::move(mean);
  m2_.assign(mean_.size(), 0.0);
  for (std::size_t i = 0; i < m2_.size(); ++i) m2_[i] = variance[i] * static_cast<double>(count);
}

}  // namespace psn
