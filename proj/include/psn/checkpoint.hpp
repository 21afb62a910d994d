#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "psn/nn.hpp"

namespace psn {

// Plain-text snapshot: key/value header, the run configuration, and named
// networks/vectors with one decimal value per line.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> header;
  std::string config_text;
  std::vector<std::pair<std::string, nn::Network>> networks;
  std::vector<std::pair<std::string, std::vector<double>>> vectors;

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  void add_network(const std::string& name, const nn::Network& net);
  void add_vector(const std::string& name, std::vector<double> values);
  const nn::Network& network(const std::string& name) const;
  const std::vector<double>& vector(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// %.17g: round-trips every double exactly.
std::string format_double(double v);

}  // namespace psn
