#include "psn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "psn/error.hpp"

namespace psn {

namespace {

constexpr const char* kMagic = "psnlab-checkpoint 1";

[[noreturn]] void malformed(const std::string& what) {
  throw std::runtime_error("checkpoint: " + what);
}

double parse_value(const std::string& line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(line, &used);
  } catch (const std::exception&) {
    malformed("bad number '" + line + "'");
  }
  if (used != line.size()) malformed("bad number '" + line + "'");
  return v;
}

std::vector<double> read_values(std::istream& in, std::size_t n) {
  std::vector<double> values(n);
  std::string line;
  for (auto& v : values) {
    if (!std::getline(in, line)) malformed("truncated value list");
    v = parse_value(line);
  }
  return values;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Checkpoint::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : header)
    if (k == key) {
      v = value;
      return;
    }
  header.emplace_back(key, value);
}

const std::string& Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  malformed("missing header key '" + key + "'");
}

void Checkpoint::add_network(const std::string& name, const nn::Network& net) {
  networks.emplace_back(name, net);
}

void Checkpoint::add_vector(const std::string& name, std::vector<double> values) {
  vectors.emplace_back(name, std::move(values));
}

const nn::Network& Checkpoint::network(const std::string& name) const {
  for (const auto& [n, net] : networks)
    if (n == name) return net;
  malformed("missing network '" + name + "'");
}

const std::vector<double>& Checkpoint::vector(const std::string& name) const {
  for (const auto& [n, v] : vectors)
    if (n == name) return v;
  malformed("missing vector '" + name + "'");
}

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out << kMagic << '\n';
  for (const auto& [k, v] : ck.header) out << k << " = " << v << '\n';
  out << "begin-config\n" << ck.config_text;
  if (!ck.config_text.empty() && ck.config_text.back() != '\n') out << '\n';
  out << "end-config\n";
  for (const auto& [name, net] : ck.networks) {
    out << "network " << name << ' ' << net.layers().size() << '\n';
    for (const auto& l : net.layers())
      out << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << nn::to_string(l.activation)
          << ' ' << (l.layer_norm ? "ln" : "noln") << '\n';
    std::vector<double> p(net.num_params());
    net.copy_params_to(p);
    out << "params " << p.size() << '\n';
    for (double v : p) out << format_double(v) << '\n';
  }
  for (const auto& [name, values] : ck.vectors) {
    out << "vector " << name << ' ' << values.size() << '\n';
    for (double v : values) out << format_double(v) << '\n';
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  std::string line;
  if (!std::getline(in, line) || line != kMagic) malformed("not a checkpoint file");
  while (std::getline(in, line) && line != "begin-config") {
    auto eq = line.find(" = ");
    if (eq == std::string::npos) malformed("bad header line '" + line + "'");
    ck.header.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  if (line != "begin-config") malformed("missing config block");
  while (std::getline(in, line) && line != "end-config") ck.config_text += line + '\n';
  if (line != "end-config") malformed("unterminated config block");

  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string kind, name;
    std::size_t count = 0;
    if (!(ls >> kind >> name >> count)) malformed("bad section line '" + line + "'");
    if (kind == "network") {
      std::vector<nn::DenseLayer> layers;
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) malformed("truncated network");
        std::istringstream ll(line);
        std::string tag, act, ln;
        int in_dim = 0, out_dim = 0;
        if (!(ll >> tag >> in_dim >> out_dim >> act >> ln) || tag != "layer" || in_dim < 1 ||
            out_dim < 1)
          malformed("bad layer line '" + line + "'");
        nn::DenseLayer l;
        l.weight = nn::Matrix::Zero(out_dim, in_dim);
        l.bias = nn::Vector::Zero(out_dim);
        l.activation = nn::parse_activation(act);
        l.layer_norm = ln == "ln";
        if (l.layer_norm) {
          l.gain = nn::Vector::Ones(out_dim);
          l.shift = nn::Vector::Zero(out_dim);
        }
        layers.push_back(std::move(l));
      }
      nn::Network net(std::move(layers));
      if (!std::getline(in, line)) malformed("missing params line");
      std::istringstream pl(line);
      std::string tag;
      std::size_t n = 0;
      if (!(pl >> tag >> n) || tag != "params" || n != net.num_params())
        malformed("parameter count mismatch for network '" + name + "'");
      net.load_params(read_values(in, n));
      ck.networks.emplace_back(name, std::move(net));
    } else if (kind == "vector") {
      ck.vectors.emplace_back(name, read_values(in, count));
    } else {
      malformed("unknown section '" + kind + "'");
    }
  }
  if (line != "end") malformed("missing end marker");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  write_checkpoint(checkpoint, out);
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace psn
