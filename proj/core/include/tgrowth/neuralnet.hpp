#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tgrowth/errors.hpp"

namespace tgrowth::nn {

/// Layer widths, input first and output last. Hidden layers use tanh, the
/// output layer is affine.
struct MLPArch {
  std::vector<std::size_t> widths;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }

  /// Sum over layers of (fan_in + 1) * fan_out.
  std::size_t parameter_count() const;
  void validate() const;

  /// [input, hidden..., output].
  static MLPArch with_hidden(std::size_t input, const std::vector<std::size_t>& hidden,
                             std::size_t output);
  friend bool operator==(const MLPArch&, const MLPArch&) = default;
};

/// Flat parameters, layer-major: for each layer the fan_out x fan_in weight
/// matrix in row-major order, then the fan_out biases.
struct MLPParams {
  MLPArch arch;
  std::vector<double> theta;
  std::uint64_t seed = 0;
};

/// xoshiro256** seeded through splitmix64. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();

 private:
  std::uint64_t s_[4];
};

/// Glorot-uniform weights, zero biases.
MLPParams init_params(const MLPArch& arch, std::uint64_t seed);

/// Forward pass over any scalar type supporting +, * and tanh (double or ad::Var).
template <class T, class Theta>
std::vector<T> forward_generic(const MLPArch& arch, const Theta& theta, std::span<const T> x) {
  using std::tanh;
  if (x.size() != arch.input_width()) throw DomainError("MLP input width mismatch");
  std::vector<T> a(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t fan_in = arch.widths[l];
    const std::size_t fan_out = arch.widths[l + 1];
    const bool hidden = l + 1 < arch.layer_count();
    std::vector<T> z(fan_out);
    for (std::size_t o = 0; o < fan_out; ++o) {
      T acc = theta[offset + fan_out * fan_in + o];
      for (std::size_t i = 0; i < fan_in; ++i) acc = acc + theta[offset + o * fan_in + i] * a[i];
      z[o] = hidden ? tanh(acc) : acc;
    }
    offset += (fan_in + 1) * fan_out;
    a = std::move(z);
  }
  return a;
}

/// Plain forward pass. DomainError on input width mismatch.
std::vector<double> forward(const MLPParams& params, std::span<const double> x);

/// Scalar-in scalar-out convenience for the dynamics models.
double forward_scalar(const MLPParams& params, double x);

/// Forward pass that keeps the layer activations for one reverse sweep.
class MLPTrace {
 public:
  explicit MLPTrace(const MLPArch& arch);

  /// Runs the network on x, storing activations. Returns the output vector.
  std::span<const double> run(std::span<const double> theta, std::span<const double> x);

  /// Vector-Jacobian product with the last run: accumulates d(out.cotangent)/dtheta
  /// into grad_theta and returns the cotangent of the input.
  std::span<const double> pullback(std::span<const double> theta,
                                   std::span<const double> out_cotangent,
                                   std::span<double> grad_theta);

  const MLPArch& arch() const noexcept { return arch_; }

 private:
  MLPArch arch_;
  std::vector<std::vector<double>> act_;  // act_[0] = input, act_[l+1] = layer l output
  std::vector<double> delta_, delta_prev_;
};

/// Adam moments and hyperparameters.
struct AdamState {
  std::size_t step_count = 0;
  std::vector<double> m;
  std::vector<double> v;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState fresh(std::size_t n, double learning_rate);
};

/// In-place Adam update with bias correction.
void adam_update(std::span<double> theta, std::span<const double> grad, AdamState& state);

struct AdamResult {
  MLPParams params;
  AdamState state;
};

/// Value-returning Adam step.
AdamResult adam_step(MLPParams params, std::span<const double> grad, AdamState state);

/// Named networks persisted together with a model tag and scalar metadata.
struct Checkpoint {
  std::string variant;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::pair<std::string, MLPParams>> networks;

  double scalar(const std::string& key) const;
  const MLPParams& network(const std::string& name) const;
};

/// Text format, values as C99 hexfloats so the round trip is bit exact:
///
///   tgrowth-checkpoint 1
///   variant <tag>
///   scalar <key> <hexfloat>          (zero or more)
///   network <name>
///   seed <uint64>
///   widths <w0> <w1> ... <wL>
///   theta <count>
///   <hexfloat>                        (count lines)
///   end
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tgrowth::nn
