#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dpdlab::nn {

enum class Activation { tanh, relu, linear };

const char* to_string(Activation a) noexcept;
/// Throws Errc::invalid_spec on an unknown name.
Activation activation_from_string(std::string_view name);

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::linear;

  bool operator==(const LayerSpec&) const = default;
};

/// Offsets of one layer inside a flat parameter vector. Weights are stored
/// row-major (out_dim x in_dim), immediately followed by the bias.
struct LayerSlice {
  std::size_t weights = 0;
  std::size_t bias = 0;
};

/// Activation record of one forward pass. u[0] is the input, u[r + 1] the
/// output of layer r. `delta` is scratch space for the backward pass.
struct Tape {
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> delta;
};

/// Stack of dense layers over a flat parameter span.
class Mlp {
 public:
  Mlp() = default;
  /// Throws Errc::dimension_mismatch when consecutive layers do not chain.
  explicit Mlp(std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in_dim; }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out_dim; }
  std::size_t param_count() const noexcept { return param_count_; }
  const LayerSlice& slice(std::size_t layer) const { return slices_.at(layer); }

  Tape make_tape() const;

  /// Fills tape.u; the output is tape.u.back().
  void forward(std::span<const double> params, std::span<const double> input, Tape& tape) const;

  /// Adds d(output_grad . output)/d(params) into grad. When input_grad is
  /// non-empty it receives d(output_grad . output)/d(input) (overwritten).
  void backward(std::span<const double> params, Tape& tape, std::span<const double> output_grad,
                std::span<double> grad, std::span<double> input_grad = {}) const;

 private:
  void check_params(std::span<const double> params) const;

  std::vector<LayerSpec> layers_;
  std::vector<LayerSlice> slices_;
  std::size_t param_count_ = 0;
};

struct ForwardResult {
  std::vector<double> output;
  Tape tape;
};

ForwardResult nn_forward(const Mlp& net, std::span<const double> params,
                         std::span<const double> input);

/// Throws Errc::stale_tape if the tape does not belong to `net`.
std::vector<double> nn_backward(const Mlp& net, std::span<const double> params, const Tape& tape,
                                std::span<const double> output_grad);

/// Glorot-uniform weights, zero biases.
void init_glorot(const Mlp& net, std::span<double> params, std::mt19937_64& rng);
std::vector<double> init_params(const Mlp& net, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  AdamConfig config;

  OptimizerState() = default;
  OptimizerState(std::size_t n, AdamConfig cfg)
      : first_moment(n, 0.0), second_moment(n, 0.0), config(cfg) {}
};

/// One bias-corrected adaptive-moment update in place. Throws
/// Errc::length_mismatch.
void adam_step(std::span<double> params, std::span<const double> grad, OptimizerState& state);

}  // namespace dpdlab::nn
