#ifndef NCELM_LSTM_HPP
#define NCELM_LSTM_HPP

#include <cstddef>
#include <vector>

#include "ncelm/rng.hpp"
#include "ncelm/tensor.hpp"

namespace ncelm {

// One LSTM layer with forget gate, no peepholes. The 4H axis is laid out as
// blocks (input i, forget f, candidate g, output o):
//   i, f, o = sigmoid(W_x x + W_h h + b),  g = tanh(...)
//   c' = f * c + i * g,                    h' = o * tanh(c')
struct LstmLayerParams {
  Matrix w_x;  // 4H x E_in
  Matrix w_h;  // 4H x H
  Matrix b;    // 1 x 4H

  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input_size, std::size_t hidden_size);

  std::size_t hidden_size() const { return w_h.cols(); }
  std::size_t input_size() const { return w_x.cols(); }
  void validate() const;
  void set_zero();
};

// Per-layer recurrent state for a batch: h and c are B x H.
struct LayerState {
  Matrix h;
  Matrix c;
  bool operator==(const LayerState&) const = default;
};

struct LstmState {
  std::vector<LayerState> layers;

  static LstmState zeros(std::size_t num_layers, std::size_t batch, std::size_t hidden);
  bool operator==(const LstmState&) const = default;
};

// Activations of one cell step, enough to run the step backwards.
struct CellCache {
  Matrix x;       // B x E_in, as fed to the cell (after any dropout)
  Matrix h_prev;  // B x H
  Matrix c_prev;  // B x H
  Matrix gates;   // B x 4H, post-nonlinearity (i, f, g, o)
  Matrix c;       // B x H
  Matrix tanh_c;  // B x H
};

struct CellStep {
  LayerState state;  // new (h, c)
  CellCache cache;
};

// One step for a batch of inputs x (B x E_in). Throws on shape mismatch.
CellStep lstm_cell_forward(const LstmLayerParams& params, const Matrix& x,
                           const LayerState& state);

struct CellGrads {
  Matrix dx;       // B x E_in
  Matrix dh_prev;  // B x H
  Matrix dc_prev;  // B x H
};

// Reverse of lstm_cell_forward. Parameter gradients are accumulated into
// `grads` (same shapes as params).
CellGrads lstm_cell_backward(const LstmLayerParams& params, const CellCache& cache,
                             const Matrix& dh, const Matrix& dc, LstmLayerParams& grads);

struct DropoutSpec {
  double rate = 0.0;  // in [0, 1); inverted scaling 1/(1-rate)
};

enum class Mode { kTrain, kEval };

// Inverted dropout mask for a rows x cols activation: each entry is 0 with
// probability `rate`, else 1/(1-rate). Throws when rate is outside [0, 1).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, RngStream& rng);

struct UnrollCache {
  std::size_t steps = 0;
  // steps x layers
  std::vector<std::vector<CellCache>> cells;
  // Masks for layer inputs (steps x layers) and for the top output (steps).
  // Empty matrices mean "no dropout".
  std::vector<std::vector<Matrix>> input_masks;
  std::vector<Matrix> output_masks;
};

struct StackForward {
  std::vector<Matrix> outputs;  // per step, B x H (after output dropout)
  LstmState final_state;
  UnrollCache cache;
};

// Runs `inputs` (one B x E matrix per step) through the stack. Dropout sits
// on every non-recurrent edge: into layer 0, between layers, and on the
// output; it is skipped in eval mode or when rate == 0.
StackForward stack_forward(const std::vector<LstmLayerParams>& layers,
                           const std::vector<Matrix>& inputs, const LstmState& init,
                           DropoutSpec dropout, Mode mode, RngStream& rng);

struct StackBackward {
  std::vector<LstmLayerParams> grads;
  std::vector<Matrix> grad_inputs;  // per step, B x E
  LstmState grad_init_state;
};

// Exact reverse mode of stack_forward for the unroll window held in `cache`.
// The incoming state is treated as a constant, so nothing flows past the
// window except the reported grad_init_state.
StackBackward stack_backward(const std::vector<LstmLayerParams>& layers,
                             const UnrollCache& cache,
                             const std::vector<Matrix>& grad_outputs);

}  // namespace ncelm

#endif  // NCELM_LSTM_HPP
