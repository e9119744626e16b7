#include "slowflow/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "slowflow/errors.hpp"

namespace slowflow::flows {

namespace {

constexpr const char* kMagic = "slowflow-checkpoint";
constexpr int kVersion = 1;

void write_double(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  out << buf;
}

void write_matrix(std::ostream& out, const char* tag, const Matrix& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      write_double(out, m(r, c));
    }
    out << '\n';
  }
}

void write_mlp(std::ostream& out, const char* name, const ad::Mlp& net) {
  out << "net " << name << ' ' << net.weights.size() << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    write_matrix(out, "w", net.weights[l]);
    write_matrix(out, "b", net.biases[l]);
  }
}

std::string mask_string(const std::vector<std::uint8_t>& mask) {
  std::string s;
  for (auto m : mask) s += m ? '1' : '0';
  return s;
}

// ---- reading -----------------------------------------------------------------

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string token() {
    std::string t;
    if (!(in_ >> t)) throw IngestionError("checkpoint: unexpected end of file");
    return t;
  }

  void expect(const std::string& want) {
    const std::string got = token();
    if (got != want)
      throw IngestionError("checkpoint: expected '" + want + "', got '" + got + "'");
  }

  std::size_t count() {
    const std::string t = token();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (end == t.c_str() || *end != '\0')
      throw IngestionError("checkpoint: bad count '" + t + "'");
    return static_cast<std::size_t>(v);
  }

  double real() {
    const std::string t = token();
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0')
      throw IngestionError("checkpoint: bad number '" + t + "'");
    return v;
  }

  Matrix matrix(const std::string& tag) {
    expect(tag);
    const std::size_t rows = count();
    const std::size_t cols = count();
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = real();
    return m;
  }

  ad::Mlp mlp(const std::string& name) {
    expect("net");
    expect(name);
    const std::size_t n = count();
    ad::Mlp net;
    for (std::size_t l = 0; l < n; ++l) {
      net.weights.push_back(matrix("w"));
      net.biases.push_back(matrix("b"));
      if (net.biases.back().rows() != 1 ||
          net.biases.back().cols() != net.weights.back().cols()) {
        throw IngestionError("checkpoint: bias shape inconsistent with weights");
      }
    }
    net.layer_sizes.push_back(net.weights.front().rows());
    for (const auto& w : net.weights) net.layer_sizes.push_back(w.cols());
    return net;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const FlowStack& stack, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "d " << stack.d << '\n';
  out << "layer_count " << stack.layers.size() << '\n';
  out << "slow " << (stack.has_slow() ? 1 : 0) << '\n';
  out << "masks";
  bool any = false;
  for (const auto& l : stack.layers) {
    if (const auto* c = std::get_if<AffineCoupling>(&l)) {
      out << (any ? ";" : " ") << mask_string(c->mask);
      any = true;
    }
  }
  if (!any) out << " -";
  out << '\n';

  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const Layer& layer = stack.layers[i];
    if (std::holds_alternative<SlowFlow>(layer)) {
      out << "layer " << i << " slow\n";
    } else if (const auto* norm = std::get_if<AffineNorm>(&layer)) {
      out << "layer " << i << " norm\n";
      write_matrix(out, "mean", norm->mean);
      write_matrix(out, "scale", norm->scale);
    } else {
      const auto& c = std::get<AffineCoupling>(layer);
      out << "layer " << i << " coupling\n";
      out << "mask " << mask_string(c.mask) << '\n';
      out << "clamp ";
      write_double(out, c.scale_clamp);
      out << '\n';
      write_mlp(out, "scale", c.scale_net);
      write_mlp(out, "shift", c.shift_net);
    }
  }
  out << "end\n";
}

void save_checkpoint(const FlowStack& stack, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IngestionError("checkpoint: cannot open for writing: " + path);
  save_checkpoint(stack, f);
  if (!f.good()) throw IngestionError("checkpoint: write failed: " + path);
}

FlowStack load_checkpoint(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  if (r.count() != static_cast<std::size_t>(kVersion))
    throw IngestionError("checkpoint: unsupported version");
  r.expect("d");
  FlowStack stack;
  stack.d = r.count();
  r.expect("layer_count");
  const std::size_t n_layers = r.count();
  r.expect("slow");
  const bool slow_flag = r.count() != 0;
  r.expect("masks");
  r.token();  // informational; per-layer masks are authoritative

  for (std::size_t i = 0; i < n_layers; ++i) {
    r.expect("layer");
    if (r.count() != i) throw IngestionError("checkpoint: layer indices out of order");
    const std::string kind = r.token();
    if (kind == "slow") {
      stack.layers.emplace_back(SlowFlow{});
    } else if (kind == "norm") {
      AffineNorm norm;
      norm.mean = r.matrix("mean");
      norm.scale = r.matrix("scale");
      if (norm.mean.cols() != stack.d || norm.scale.cols() != stack.d)
        throw IngestionError("checkpoint: norm width differs from header d");
      stack.layers.emplace_back(std::move(norm));
    } else if (kind == "coupling") {
      AffineCoupling c;
      r.expect("mask");
      const std::string mask = r.token();
      if (mask.size() != stack.d) throw IngestionError("checkpoint: mask width differs from d");
      for (char ch : mask) {
        if (ch != '0' && ch != '1') throw IngestionError("checkpoint: bad mask bit");
        c.mask.push_back(ch == '1' ? 1 : 0);
      }
      r.expect("clamp");
      c.scale_clamp = r.real();
      c.scale_net = r.mlp("scale");
      c.shift_net = r.mlp("shift");
      if (c.scale_net.layer_sizes.front() != stack.d ||
          c.scale_net.layer_sizes.back() != stack.d)
        throw IngestionError("checkpoint: coupling net width differs from d");
      stack.layers.emplace_back(std::move(c));
    } else {
      throw IngestionError("checkpoint: unknown layer kind '" + kind + "'");
    }
  }
  r.expect("end");
  if (stack.has_slow() != slow_flag)
    throw IngestionError("checkpoint: slow header flag contradicts layer list");
  return stack;
}

FlowStack load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IngestionError("checkpoint: cannot open: " + path);
  return load_checkpoint(f);
}

}  // namespace slowflow::flows
