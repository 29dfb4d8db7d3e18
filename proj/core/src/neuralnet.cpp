#include "tgrowth/neuralnet.hpp"

#include <Eigen/Dense>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tgrowth::nn {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::string hexfloat(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double parse_hexfloat(const std::string& token, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size()) {
    throw ParseError("bad floating-point value '" + token + "'", line);
  }
  return v;
}

}  // namespace

std::size_t MLPArch::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += (widths[l] + 1) * widths[l + 1];
  return n;
}

void MLPArch::validate() const {
  if (widths.size() < 2) throw DomainError("MLP needs at least input and output widths");
  for (auto w : widths) {
    if (w < 1) throw DomainError("MLP layer widths must be >= 1");
  }
}

MLPArch MLPArch::with_hidden(std::size_t input, const std::vector<std::size_t>& hidden,
                             std::size_t output) {
  MLPArch arch;
  arch.widths.push_back(input);
  arch.widths.insert(arch.widths.end(), hidden.begin(), hidden.end());
  arch.widths.push_back(output);
  arch.validate();
  return arch;
}

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

Xoshiro256::result_type Xoshiro256::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

MLPParams init_params(const MLPArch& arch, std::uint64_t seed) {
  arch.validate();
  MLPParams params{arch, std::vector<double>(arch.parameter_count(), 0.0), seed};
  Xoshiro256 rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t fan_in = arch.widths[l];
    const std::size_t fan_out = arch.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
      params.theta[offset + i] = limit * (2.0 * rng.uniform() - 1.0);
    }
    offset += (fan_in + 1) * fan_out;  // biases stay zero
  }
  return params;
}

std::vector<double> forward(const MLPParams& params, std::span<const double> x) {
  MLPTrace trace(params.arch);
  const auto out = trace.run(params.theta, x);
  return {out.begin(), out.end()};
}

double forward_scalar(const MLPParams& params, double x) {
  if (params.arch.input_width() != 1 || params.arch.output_width() != 1) {
    throw DomainError("forward_scalar needs a 1-in 1-out network");
  }
  return forward(params, std::span<const double>(&x, 1)).front();
}

MLPTrace::MLPTrace(const MLPArch& arch) : arch_(arch) {
  arch_.validate();
  act_.resize(arch_.widths.size());
  for (std::size_t l = 0; l < arch_.widths.size(); ++l) act_[l].resize(arch_.widths[l]);
  std::size_t widest = 0;
  for (auto w : arch_.widths) widest = std::max(widest, w);
  delta_.resize(widest);
  delta_prev_.resize(widest);
}

std::span<const double> MLPTrace::run(std::span<const double> theta,
                                      std::span<const double> x) {
  if (x.size() != arch_.input_width()) throw DomainError("MLP input width mismatch");
  if (theta.size() != arch_.parameter_count()) throw DomainError("MLP parameter count mismatch");
  std::copy(x.begin(), x.end(), act_[0].begin());
  std::size_t offset = 0;
  const std::size_t layers = arch_.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(arch_.widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch_.widths[l + 1]);
    ConstMatrixMap W(theta.data() + offset, fan_out, fan_in);
    ConstVectorMap b(theta.data() + offset + fan_out * fan_in, fan_out);
    ConstVectorMap in(act_[l].data(), fan_in);
    VectorMap out(act_[l + 1].data(), fan_out);
    out.noalias() = W * in;
    out += b;
    if (l + 1 < layers) out = out.array().tanh();
    offset += static_cast<std::size_t>((fan_in + 1) * fan_out);
  }
  return act_.back();
}

std::span<const double> MLPTrace::pullback(std::span<const double> theta,
                                           std::span<const double> out_cotangent,
                                           std::span<double> grad_theta) {
  if (out_cotangent.size() != arch_.output_width()) {
    throw DomainError("MLP output cotangent width mismatch");
  }
  if (grad_theta.size() != theta.size()) throw DomainError("gradient buffer size mismatch");
  std::copy(out_cotangent.begin(), out_cotangent.end(), delta_.begin());

  std::size_t offset = arch_.parameter_count();
  for (std::size_t l = arch_.layer_count(); l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(arch_.widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch_.widths[l + 1]);
    offset -= static_cast<std::size_t>((fan_in + 1) * fan_out);
    ConstMatrixMap W(theta.data() + offset, fan_out, fan_in);
    MatrixMap gW(grad_theta.data() + offset, fan_out, fan_in);
    VectorMap gb(grad_theta.data() + offset + fan_out * fan_in, fan_out);
    ConstVectorMap delta(delta_.data(), fan_out);
    ConstVectorMap in(act_[l].data(), fan_in);
    gW.noalias() += delta * in.transpose();
    gb += delta;
    VectorMap prev(delta_prev_.data(), fan_in);
    prev.noalias() = W.transpose() * delta;
    if (l > 0) prev = prev.array() * (1.0 - in.array().square());
    std::swap(delta_, delta_prev_);
  }
  return std::span<const double>(delta_.data(), arch_.input_width());
}

AdamState AdamState::fresh(std::size_t n, double learning_rate) {
  if (!(learning_rate > 0.0)) throw DomainError("Adam learning rate must be > 0");
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_update(std::span<double> theta, std::span<const double> grad, AdamState& state) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw DomainError("Adam vectors differ in length");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

AdamResult adam_step(MLPParams params, std::span<const double> grad, AdamState state) {
  adam_update(params.theta, grad, state);
  return {std::move(params), std::move(state)};
}

double Checkpoint::scalar(const std::string& key) const {
  for (const auto& [k, v] : scalars) {
    if (k == key) return v;
  }
  throw NotFoundError("checkpoint has no scalar '" + key + "'");
}

const MLPParams& Checkpoint::network(const std::string& name) const {
  for (const auto& [k, net] : networks) {
    if (k == name) return net;
  }
  throw NotFoundError("checkpoint has no network '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out << "tgrowth-checkpoint 1\n";
  out << "variant " << checkpoint.variant << '\n';
  for (const auto& [key, value] : checkpoint.scalars) {
    out << "scalar " << key << ' ' << hexfloat(value) << '\n';
  }
  for (const auto& [name, net] : checkpoint.networks) {
    out << "network " << name << '\n';
    out << "seed " << net.seed << '\n';
    out << "widths";
    for (auto w : net.arch.widths) out << ' ' << w;
    out << "\ntheta " << net.theta.size() << '\n';
    for (double t : net.theta) out << hexfloat(t) << '\n';
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint cp;
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError("unexpected end of checkpoint", line_no);
    ++line_no;
    return std::istringstream(line);
  };
  auto expect = [&](std::istringstream& ss, const std::string& keyword) {
    std::string word;
    ss >> word;
    if (word != keyword) throw ParseError("expected '" + keyword + "'", line_no);
  };

  {
    auto ss = next();
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "tgrowth-checkpoint" || version != 1) {
      throw ParseError("not a tgrowth checkpoint (version 1)", line_no);
    }
  }
  {
    auto ss = next();
    expect(ss, "variant");
    ss >> cp.variant;
  }
  while (true) {
    auto ss = next();
    std::string word;
    ss >> word;
    if (word == "end") break;
    if (word == "scalar") {
      std::string key, value;
      ss >> key >> value;
      cp.scalars.emplace_back(key, parse_hexfloat(value, line_no));
    } else if (word == "network") {
      MLPParams net;
      std::string name;
      ss >> name;
      {
        auto s2 = next();
        expect(s2, "seed");
        s2 >> net.seed;
      }
      {
        auto s2 = next();
        expect(s2, "widths");
        std::size_t w = 0;
        while (s2 >> w) net.arch.widths.push_back(w);
        net.arch.validate();
      }
      std::size_t count = 0;
      {
        auto s2 = next();
        expect(s2, "theta");
        s2 >> count;
      }
      if (count != net.arch.parameter_count()) {
        throw ParseError("theta count does not match widths", line_no);
      }
      net.theta.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        next();
        net.theta.push_back(parse_hexfloat(line, line_no));
      }
      cp.networks.emplace_back(name, std::move(net));
    } else {
      throw ParseError("unknown checkpoint record '" + word + "'", line_no);
    }
  }
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace tgrowth::nn
