#pragma once

// Bidirectional LSTM networks for UWB correction (2 x 8) and pose estimation
// (2 x 32).
//
// Gate layout: every 4H-sized block is ordered [input, forget, cell, output]
// with one bias vector per direction. Each window starts from zero hidden and
// cell state; nothing is carried across windows.
//
// Instantiated for float (deployed inference) and double (training, gradient
// checks).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smartposer/matrix.hpp"
#include "smartposer/tensor.hpp"

namespace smartposer::nn {

struct ModelSpec {
  std::uint32_t input_dim = 25;
  std::uint32_t corrector_layers = 2;
  std::uint32_t corrector_hidden = 8;
  std::uint32_t estimator_layers = 2;
  std::uint32_t estimator_hidden = 32;
  std::uint32_t pose_dim = 9;
  std::uint32_t window_len = 125;
  std::uint32_t output_frame_lag = 5;
  // false: IMU-only ablation. No corrector; the estimator sees the 24
  // non-UWB features.
  bool use_uwb = true;

  std::uint32_t estimator_input_dim() const { return use_uwb ? input_dim : input_dim - 1; }
  // 0-based index of the reported frame (119 for the default spec).
  std::size_t output_frame_index() const { return window_len - 1 - output_frame_lag; }
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

template <typename T>
struct LstmDirection {
  BasicTensor<T> w_input;   // 4H x D
  BasicTensor<T> w_hidden;  // 4H x H
  BasicTensor<T> bias;      // 4H

  std::size_t hidden() const { return w_hidden.rank() == 2 ? w_hidden.dim(1) : 0; }
  std::size_t input_dim() const { return w_input.rank() == 2 ? w_input.dim(1) : 0; }
};

template <typename T>
struct BiLstmLayer {
  LstmDirection<T> forward;
  LstmDirection<T> backward;
};

template <typename T>
struct Network {
  std::vector<BiLstmLayer<T>> layers;
  BasicTensor<T> head_weight;  // K x 2H
  BasicTensor<T> head_bias;    // K

  bool empty() const { return layers.empty(); }
};

template <typename T>
struct Model {
  ModelSpec spec;
  Network<T> corrector;  // empty when !spec.use_uwb
  Network<T> estimator;
};

using ModelWeights = Model<float>;

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T>* tensor;
};

template <typename T>
struct ConstNamedTensor {
  std::string name;
  const BasicTensor<T>* tensor;
};

// Zero-initialized model with the shapes implied by `spec`.
template <typename T>
Model<T> make_model(const ModelSpec& spec);

// Every parameter tensor in a fixed order. Names look like
// "estimator.l1.bwd.w_hidden" or "corrector.head.bias".
template <typename T>
std::vector<NamedTensor<T>> named_tensors(Model<T>& model);
template <typename T>
std::vector<ConstNamedTensor<T>> named_tensors(const Model<T>& model);

template <typename T>
std::size_t parameter_count(const Network<T>& net);
template <typename T>
std::size_t parameter_count(const Model<T>& model);

// Throws InvalidInput when a tensor shape disagrees with the spec or a value
// is non-finite.
template <typename T>
void validate_model(const Model<T>& model);

template <typename U, typename T>
Model<U> model_cast(const Model<T>& model) {
  Model<U> out;
  out.spec = model.spec;
  auto cast_net = [](const Network<T>& n) {
    Network<U> r;
    for (const auto& l : n.layers) {
      BiLstmLayer<U> ul;
      ul.forward = {l.forward.w_input.template cast<U>(), l.forward.w_hidden.template cast<U>(),
                    l.forward.bias.template cast<U>()};
      ul.backward = {l.backward.w_input.template cast<U>(), l.backward.w_hidden.template cast<U>(),
                     l.backward.bias.template cast<U>()};
      r.layers.push_back(std::move(ul));
    }
    r.head_weight = n.head_weight.template cast<U>();
    r.head_bias = n.head_bias.template cast<U>();
    return r;
  };
  out.corrector = cast_net(model.corrector);
  out.estimator = cast_net(model.estimator);
  return out;
}

template <typename T>
struct CellState {
  ColVector<T> h;
  ColVector<T> c;
};

// One LSTM step. Throws InvalidInput on shape mismatch.
template <typename T>
CellState<T> lstm_cell(std::span<const T> x, std::span<const T> h, std::span<const T> c,
                       const LstmDirection<T>& weights);

// Cached activations of one direction, indexed by time (not processing order).
template <typename T>
struct DirectionTrace {
  Matrix<T> gates;   // T x 4H, post-activation [i f g o]
  Matrix<T> cell;    // T x H
  Matrix<T> hidden;  // T x H
};

template <typename T>
struct LayerTrace {
  Matrix<T> input;  // T x D
  DirectionTrace<T> forward;
  DirectionTrace<T> backward;
};

template <typename T>
struct NetworkTrace {
  std::vector<LayerTrace<T>> layers;
  Matrix<T> top;  // T x 2H, input to the head
};

// Runs one direction over `seq` (T x D) from zero state. Returns T x H.
template <typename T>
Matrix<T> lstm_direction_forward(const Matrix<T>& seq, const LstmDirection<T>& weights, bool reverse,
                                 DirectionTrace<T>* trace = nullptr);

// Stacked bidirectional layers. Returns T x 2H with [forward | backward].
template <typename T>
Matrix<T> bilstm_forward(const Matrix<T>& seq, std::span<const BiLstmLayer<T>> layers,
                         NetworkTrace<T>* trace = nullptr);

// Bi-LSTM stack followed by the per-timestep linear head. Returns T x K.
template <typename T>
Matrix<T> network_forward(const Network<T>& net, const Matrix<T>& seq, NetworkTrace<T>* trace = nullptr);

// Corrected arm-span-normalized distance for every frame of `window`.
template <typename T>
std::vector<T> uwb_correct(const Matrix<T>& window, const Model<T>& model);

// Window with the UWB column replaced by `corrected` (or dropped for the
// IMU-only spec).
template <typename T>
Matrix<T> estimator_input(const Matrix<T>& window, std::span<const T> corrected, const ModelSpec& spec);

// Normalized [shoulder, elbow, wrist] for every frame. `input` must already be
// the estimator input (see estimator_input).
template <typename T>
Matrix<T> pose_estimate(const Matrix<T>& input, const Model<T>& model);

// Row `spec.output_frame_index()` of a window-length sequence. Throws
// InvalidInput on a different length.
template <typename T>
RowVector<T> select_output_frame(const Matrix<T>& seq, const ModelSpec& spec = {});

template <typename T>
struct WindowOutput {
  std::vector<T> corrected;  // per frame; empty for IMU-only models
  Matrix<T> poses;           // T x 9
};

// Full two-stage pass over one window (window_len x input_dim).
template <typename T>
WindowOutput<T> run_window(const Model<T>& model, const Matrix<T>& window);

struct Prediction {
  std::array<double, 9> pose{};  // normalized
  double uwb_corrected = 0.0;    // normalized; raw value for IMU-only models
};

// run_window + select_output_frame.
template <typename T>
Prediction infer_window(const Model<T>& model, const Matrix<T>& window);

}  // namespace smartposer::nn
