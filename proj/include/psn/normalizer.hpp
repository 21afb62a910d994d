#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace psn {

// Running per-dimension mean/variance (Welford).
class OnlineNormalizer {
public:
  explicit OnlineNormalizer(std::size_t dim = 0);

  void update(std::span<const double> x);
  std::vector<double> normalize(std::span<const double> x) const;

  std::size_t dim() const { return mean_.size(); }
  std::uint64_t count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> variance() const;  // population variance

  // Restores a saved state (count, mean, population variance).
  void restore(std::uint64_t count, std::vector<double> mean, std::span<const double> variance);

  static constexpr double kEps = 1e-8;

private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace psn
