#include "psn/rng.hpp"

#include <stdexcept>

namespace psn {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seeded_engine(seed)) {}

Rng Rng::split(std::string_view stream) const {
  std::uint64_t h = fnv1a(stream);
  // splitmix64 finaliser over (seed, name hash)
  std::uint64_t z = seed_ ^ (h + 0x9e3779b97f4a7c15ULL + (seed_ << 6) + (seed_ >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return Rng(z);
}

double Rng::normal() { return normal_(engine_); }

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double low, double high) {
  return std::uniform_real_distribution<double>(low, high)(engine_);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

}  // namespace psn
