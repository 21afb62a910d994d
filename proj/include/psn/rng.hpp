#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace psn {

// Seedable generator with named sub-streams. split() derives a child from the
// root seed and the stream name only, so the draws of one stream never depend
// on how many values another stream consumed.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0);

  Rng split(std::string_view stream) const;

  std::uint64_t seed() const { return seed_; }

  double normal();                       // N(0, 1)
  double uniform();                      // [0, 1)
  double uniform(double low, double high);
  std::size_t index(std::size_t n);      // uniform in [0, n)
  bool bernoulli(double p);

  std::mt19937_64& engine() { return engine_; }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t fnv1a(std::string_view text);

}  // namespace psn
