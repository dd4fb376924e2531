#ifndef NCELM_MODEL_HPP
#define NCELM_MODEL_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/heads.hpp"
#include "ncelm/lstm.hpp"
#include "ncelm/rng.hpp"
#include "ncelm/tensor.hpp"

namespace ncelm {

struct ModelShape {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  std::size_t layers = 2;

  bool operator==(const ModelShape&) const = default;
};

// Embedding table, LSTM stack and output head.
struct ModelParams {
  Matrix embedding;  // |V| x E
  std::vector<LstmLayerParams> layers;
  HeadParams head;

  static ModelParams zeros(const ModelShape& shape);
  ModelShape shape() const;

  struct TensorRef {
    std::string name;
    Matrix* tensor;
  };
  struct ConstTensorRef {
    std::string name;
    const Matrix* tensor;
  };
  // Stable order: embedding, layer<l>.w_x, layer<l>.w_h, layer<l>.b,
  // head.theta, head.bias, head.ln_z.
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

// Gradient rows for a table whose updates are sparse. With dense == true
// `values` covers every row in order; otherwise row i of values belongs to
// table row rows[i].
struct RowGrad {
  std::vector<WordId> rows;
  Matrix values;
  bool dense = false;

  Matrix expand(std::size_t num_rows, std::size_t cols) const;
};

struct Gradients {
  RowGrad embedding;                    // E wide
  std::vector<LstmLayerParams> layers;  // dense
  RowGrad theta;                        // H wide
  RowGrad bias;                         // 1 wide, rows aligned with theta
  Matrix ln_z{1, 1};
  bool train_embedding = true;

  // Calls fn(name, values) for every gradient block.
  void for_each(const std::function<void(const std::string&, std::span<double>)>& fn);
  void for_each(const std::function<void(const std::string&, std::span<const double>)>& fn) const;
  // Same layout as ModelParams::tensors(), zero where no gradient exists.
  ModelParams to_dense(const ModelShape& shape) const;
};

struct SoftmaxObjective {};

struct NceObjective {
  const NceBatchSample* sample = nullptr;  // positions in (t, b) order
  ZMode zmode = ZMode::kConstant;
};

using Objective = std::variant<SoftmaxObjective, NceObjective>;

struct BatchOptions {
  DropoutSpec dropout;
  Mode mode = Mode::kTrain;
  bool train_embedding = true;
};

struct BatchResult {
  double loss = 0.0;
  LstmState final_state;
};

// Flattened target order used by both heads: row t * B + b.
std::vector<WordId> batch_targets(const Batch& batch);

// Forward pass over one unroll window, head loss, and (when grads is not
// null) the full backward pass. `dropout_rng` is taken by value so repeated
// calls with the same stream see identical masks.
BatchResult model_objective(const ModelParams& params, const Batch& batch, const LstmState& init,
                            const Objective& objective, const BatchOptions& options,
                            RngStream dropout_rng, Gradients* grads,
                            RngStream* dropout_rng_out = nullptr);

// Top-layer context vectors, rows in (t, b) order, eval mode.
Matrix context_vectors(const ModelParams& params, const Batch& batch, const LstmState& init,
                       LstmState* final_state);

}  // namespace ncelm

#endif  // NCELM_MODEL_HPP
