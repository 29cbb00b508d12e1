#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpdlab/exec.hpp"
#include "dpdlab/nn.hpp"
#include "dpdlab/signal.hpp"

namespace dpdlab::dpd {

enum class ModelKind { r2tdnn, svden, hg_r2tdnn, hn_r2tdnn };

const char* to_string(ModelKind kind) noexcept;
/// Accepts "R2TDNN", "SVDEN", "HG-R2TDNN", "HN-R2TDNN". Throws Errc::invalid_spec.
ModelKind kind_from_string(std::string_view name);
/// HG and HN consume the operating-state vector.
bool uses_state(ModelKind kind) noexcept;

inline constexpr std::size_t kStateDim = 3;

/// Hypernetwork / heterogeneous-input encoding of an operating state:
/// [BW / BW_max, P / P_max, P / P_max]. The power ratio is duplicated on purpose.
struct StateVector {
  std::array<double, kStateDim> c{};
  bool operator==(const StateVector&) const = default;
};

/// Throws Errc::invalid_spec for a zero BW_max or P_max.
StateVector make_state_vector(double bandwidth_hz, double power_dbm, double bw_max_hz,
                              double p_max_dbm);

/// Output layer of the main network: 2 x hidden weights (row-major) and 2 biases.
struct OutputLayer {
  std::size_t hidden_dim = 0;
  std::vector<double> weights;
  std::array<double, 2> bias{};
};

/// Layered NN predistorter. All trainable values live in one flat vector laid
/// out as [trunk | head (not HN) | shortcut (SVDEN) | hypernetwork (HN)].
///
/// The trunk holds the tanh hidden layers D_1 -> ... -> D_{R-1}; the output
/// layer D_{R-1} -> 2 is either owned (head) or produced by the hypernetwork.
class DpdModel {
 public:
  DpdModel() = default;
  /// Zero-parameter model with the given structure. main_dims is the full
  /// D_1..D_R list with D_1 = 2M+2 and D_R = 2 (HG adds its 3 inputs on top).
  DpdModel(ModelKind kind, int memory_length, std::vector<std::size_t> main_dims,
           std::vector<std::size_t> hyper_hidden_dims);

  ModelKind kind() const noexcept { return kind_; }
  int memory_length() const noexcept { return memory_length_; }
  std::size_t window_dim() const noexcept { return 2 * static_cast<std::size_t>(memory_length_) + 2; }
  /// window_dim, plus kStateDim for HG.
  std::size_t input_dim() const noexcept { return trunk_.input_dim(); }
  std::size_t hidden_dim() const noexcept { return trunk_.output_dim(); }
  const std::vector<std::size_t>& main_dims() const noexcept { return main_dims_; }
  const std::vector<std::size_t>& hyper_hidden_dims() const noexcept { return hyper_hidden_; }

  const nn::Mlp& trunk() const noexcept { return trunk_; }
  const nn::Mlp& hyper() const noexcept { return hyper_; }
  bool has_hyper() const noexcept { return kind_ == ModelKind::hn_r2tdnn; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  /// Parameters of the main network (trunk plus owned head, if any).
  std::size_t main_param_count() const noexcept { return trunk_.param_count() + head_size(); }

  std::size_t trunk_offset() const noexcept { return 0; }
  std::size_t head_offset() const noexcept { return trunk_.param_count(); }
  std::size_t head_size() const noexcept {
    return kind_ == ModelKind::hn_r2tdnn ? 0 : 2 * hidden_dim() + 2;
  }
  std::size_t shortcut_offset() const noexcept { return head_offset() + head_size(); }
  std::size_t shortcut_size() const noexcept { return kind_ == ModelKind::svden ? 4 : 0; }
  std::size_t hyper_offset() const noexcept { return shortcut_offset() + shortcut_size(); }

  std::span<const double> trunk_params() const noexcept {
    return std::span<const double>(params_).subspan(0, trunk_.param_count());
  }
  std::span<const double> hyper_params() const noexcept {
    return std::span<const double>(params_).subspan(hyper_offset(), hyper_.param_count());
  }

  /// Grid normalization the state vector was built with (0 when unset).
  double bw_max_hz = 0.0;
  double p_max_dbm = 0.0;
  /// 1-based state indices this model was trained on.
  std::vector<int> trained_states;

 private:
  ModelKind kind_ = ModelKind::r2tdnn;
  int memory_length_ = 0;
  std::vector<std::size_t> main_dims_;
  std::vector<std::size_t> hyper_hidden_;
  nn::Mlp trunk_;
  nn::Mlp hyper_;
  std::vector<double> params_;
};

/// Structure plus initialization: Glorot hidden layers, zero output head (or
/// zero hypernetwork output layer), identity SVDEN shortcut. Every kind
/// therefore starts as the identity predistorter.
///
/// Throws Errc::dimension_mismatch, Errc::missing_hyper_spec.
DpdModel build_model(ModelKind kind, int memory_length, const std::vector<std::size_t>& main_dims,
                     const std::optional<std::vector<std::size_t>>& hyper_hidden_dims,
                     std::uint64_t seed);

/// [u_I(n), u_Q(n), ..., u_I(n-M), u_Q(n-M)] with zero history before the start.
std::vector<double> make_input_window(std::span<const cplx> u, std::size_t n, int memory_length);
void fill_input_window(std::span<const cplx> u, std::size_t n, int memory_length, std::span<double> out);

/// Hypernetwork output split into W_R (row-major) then b_R. Throws Errc::wrong_kind.
OutputLayer hyper_generate(const DpdModel& model, const StateVector& c);
/// Owned head for R2TDNN/SVDEN/HG, generated layer for HN (c required).
OutputLayer output_layer(const DpdModel& model, const std::optional<StateVector>& c);

/// One predistorted sample (s_I, s_Q) from an input window. For HG the state
/// is appended to the window internally. Throws Errc::missing_state,
/// Errc::dimension_mismatch.
std::array<double, 2> predistort_sample(const DpdModel& model, std::span<const double> window,
                                        const std::optional<StateVector>& c);

/// Sliding-window predistortion; output length equals input length.
ComplexSignal predistort_signal(const DpdModel& model, const ComplexSignal& u,
                                const std::optional<StateVector>& c, Exec exec = Exec::parallel);

}  // namespace dpdlab::dpd
