#include "ncelm/lstm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ncelm/kernels.hpp"

namespace ncelm {
namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void multiply_inplace(Matrix& m, const Matrix& mask) {
  auto v = m.values();
  auto k = mask.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= k[i];
}

}  // namespace

LstmLayerParams::LstmLayerParams(std::size_t input_size, std::size_t hidden_size)
    : w_x(4 * hidden_size, input_size), w_h(4 * hidden_size, hidden_size), b(1, 4 * hidden_size) {}

void LstmLayerParams::validate() const {
  const std::size_t h = w_h.cols();
  require(h > 0 && w_h.rows() == 4 * h, "LstmLayerParams: w_h must be 4H x H, got " +
                                            w_h.shape_string());
  require(w_x.rows() == 4 * h, "LstmLayerParams: w_x must have 4H rows, got " + w_x.shape_string());
  require(b.rows() == 1 && b.cols() == 4 * h, "LstmLayerParams: b must be 1 x 4H, got " +
                                                  b.shape_string());
}

void LstmLayerParams::set_zero() {
  w_x.fill(0.0);
  w_h.fill(0.0);
  b.fill(0.0);
}

LstmState LstmState::zeros(std::size_t num_layers, std::size_t batch, std::size_t hidden) {
  LstmState s;
  s.layers.assign(num_layers, LayerState{Matrix(batch, hidden), Matrix(batch, hidden)});
  return s;
}

CellStep lstm_cell_forward(const LstmLayerParams& params, const Matrix& x,
                           const LayerState& state) {
  params.validate();
  const std::size_t hidden = params.hidden_size();
  const std::size_t batch = x.rows();
  require(x.cols() == params.input_size(), "lstm_cell_forward: input " + x.shape_string() +
                                               " does not match w_x " +
                                               params.w_x.shape_string());
  require(state.h.rows() == batch && state.h.cols() == hidden && state.c.rows() == batch &&
              state.c.cols() == hidden,
          "lstm_cell_forward: state shape mismatch h=" + state.h.shape_string() +
              " c=" + state.c.shape_string());

  CellStep step;
  CellCache& cache = step.cache;
  cache.x = x;
  cache.h_prev = state.h;
  cache.c_prev = state.c;
  cache.gates = Matrix(batch, 4 * hidden);
  kernels::gemm_nt(x, params.w_x, cache.gates, false);
  kernels::gemm_nt(state.h, params.w_h, cache.gates, true);
  kernels::add_row_bias(cache.gates, params.b.values());

  cache.c = Matrix(batch, hidden);
  cache.tanh_c = Matrix(batch, hidden);
  Matrix h(batch, hidden);
  for (std::size_t r = 0; r < batch; ++r) {
    auto g = cache.gates.row(r);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double ig = sigmoid(g[j]);
      const double fg = sigmoid(g[hidden + j]);
      const double cg = std::tanh(g[2 * hidden + j]);
      const double og = sigmoid(g[3 * hidden + j]);
      g[j] = ig;
      g[hidden + j] = fg;
      g[2 * hidden + j] = cg;
      g[3 * hidden + j] = og;
      const double c = fg * state.c(r, j) + ig * cg;
      const double tc = std::tanh(c);
      cache.c(r, j) = c;
      cache.tanh_c(r, j) = tc;
      h(r, j) = og * tc;
    }
  }
  step.state.h = std::move(h);
  step.state.c = cache.c;
  return step;
}

CellGrads lstm_cell_backward(const LstmLayerParams& params, const CellCache& cache,
                             const Matrix& dh, const Matrix& dc, LstmLayerParams& grads) {
  const std::size_t hidden = params.hidden_size();
  const std::size_t batch = cache.x.rows();
  require(dh.rows() == batch && dh.cols() == hidden && dc.rows() == batch && dc.cols() == hidden,
          "lstm_cell_backward: gradient shape mismatch dh=" + dh.shape_string() +
              " dc=" + dc.shape_string());
  require(grads.w_x.rows() == params.w_x.rows() && grads.w_x.cols() == params.w_x.cols() &&
              grads.w_h.rows() == params.w_h.rows() && grads.b.cols() == params.b.cols(),
          "lstm_cell_backward: gradient accumulator shape mismatch");

  CellGrads out;
  out.dc_prev = Matrix(batch, hidden);
  Matrix d_pre(batch, 4 * hidden);
  for (std::size_t r = 0; r < batch; ++r) {
    auto g = cache.gates.row(r);
    auto dp = d_pre.row(r);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double ig = g[j], fg = g[hidden + j], cg = g[2 * hidden + j], og = g[3 * hidden + j];
      const double tc = cache.tanh_c(r, j);
      const double dhv = dh(r, j);
      const double dct = dc(r, j) + dhv * og * (1.0 - tc * tc);
      const double d_o = dhv * tc;
      const double d_i = dct * cg;
      const double d_g = dct * ig;
      const double d_f = dct * cache.c_prev(r, j);
      out.dc_prev(r, j) = dct * fg;
      dp[j] = d_i * ig * (1.0 - ig);
      dp[hidden + j] = d_f * fg * (1.0 - fg);
      dp[2 * hidden + j] = d_g * (1.0 - cg * cg);
      dp[3 * hidden + j] = d_o * og * (1.0 - og);
    }
  }
  kernels::gemm_tn(d_pre, cache.x, grads.w_x, true);
  kernels::gemm_tn(d_pre, cache.h_prev, grads.w_h, true);
  kernels::sum_rows(d_pre, grads.b.values());

  out.dx = Matrix(batch, params.input_size());
  kernels::gemm_nn(d_pre, params.w_x, out.dx, false);
  out.dh_prev = Matrix(batch, hidden);
  kernels::gemm_nn(d_pre, params.w_h, out.dh_prev, false);
  return out;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, RngStream& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.uniform01() < rate ? 0.0 : keep_scale;
  return mask;
}

StackForward stack_forward(const std::vector<LstmLayerParams>& layers,
                           const std::vector<Matrix>& inputs, const LstmState& init,
                           DropoutSpec dropout, Mode mode, RngStream& rng) {
  require(!layers.empty(), "stack_forward: no layers");
  require(!inputs.empty(), "stack_forward: need at least one step");
  require(dropout.rate >= 0.0 && dropout.rate < 1.0,
          "stack_forward: dropout rate must lie in [0, 1), got " + std::to_string(dropout.rate));
  require(init.layers.size() == layers.size(), "stack_forward: state has " +
                                                   std::to_string(init.layers.size()) +
                                                   " layers, stack has " +
                                                   std::to_string(layers.size()));
  const std::size_t batch = inputs.front().rows();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    const std::size_t expect_in = l == 0 ? inputs.front().cols() : layers[l - 1].hidden_size();
    require(layers[l].input_size() == expect_in,
            "stack_forward: layer " + std::to_string(l) + " expects input width " +
                std::to_string(layers[l].input_size()) + ", got " + std::to_string(expect_in));
  }
  for (const auto& x : inputs)
    require(x.rows() == batch && x.cols() == layers.front().input_size(),
            "stack_forward: input step shape " + x.shape_string() + " inconsistent");

  const bool use_dropout = mode == Mode::kTrain && dropout.rate > 0.0;
  const std::size_t steps = inputs.size();
  const std::size_t num_layers = layers.size();

  StackForward out;
  out.final_state = init;
  out.cache.steps = steps;
  out.cache.cells.resize(steps);
  out.cache.input_masks.resize(steps);
  out.cache.output_masks.resize(steps);
  out.outputs.reserve(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    Matrix x = inputs[t];
    out.cache.cells[t].reserve(num_layers);
    out.cache.input_masks[t].resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
      if (use_dropout) {
        Matrix mask = dropout_mask(x.rows(), x.cols(), dropout.rate, rng);
        multiply_inplace(x, mask);
        out.cache.input_masks[t][l] = std::move(mask);
      }
      CellStep step = lstm_cell_forward(layers[l], x, out.final_state.layers[l]);
      out.final_state.layers[l] = std::move(step.state);
      out.cache.cells[t].push_back(std::move(step.cache));
      x = out.final_state.layers[l].h;
    }
    if (use_dropout) {
      Matrix mask = dropout_mask(x.rows(), x.cols(), dropout.rate, rng);
      multiply_inplace(x, mask);
      out.cache.output_masks[t] = std::move(mask);
    }
    out.outputs.push_back(std::move(x));
  }
  return out;
}

StackBackward stack_backward(const std::vector<LstmLayerParams>& layers,
                             const UnrollCache& cache,
                             const std::vector<Matrix>& grad_outputs) {
  require(cache.steps > 0 && cache.cells.size() == cache.steps,
          "stack_backward: cache does not come from stack_forward");
  require(grad_outputs.size() == cache.steps,
          "stack_backward: expected " + std::to_string(cache.steps) + " output gradients, got " +
              std::to_string(grad_outputs.size()));
  const std::size_t num_layers = layers.size();
  require(cache.cells.front().size() == num_layers, "stack_backward: layer count mismatch");
  const std::size_t batch = cache.cells.front().front().x.rows();

  StackBackward out;
  out.grads.reserve(num_layers);
  for (const auto& p : layers) {
    LstmLayerParams g(p.input_size(), p.hidden_size());
    out.grads.push_back(std::move(g));
  }
  out.grad_inputs.resize(cache.steps);

  // Recurrent carries from step t+1.
  LstmState carry = LstmState::zeros(num_layers, batch, 0);
  for (std::size_t l = 0; l < num_layers; ++l) {
    carry.layers[l].h = Matrix(batch, layers[l].hidden_size());
    carry.layers[l].c = Matrix(batch, layers[l].hidden_size());
  }

  for (std::size_t t = cache.steps; t-- > 0;) {
    const Matrix& go = grad_outputs[t];
    const std::size_t top_h = layers.back().hidden_size();
    require(go.rows() == batch && go.cols() == top_h,
            "stack_backward: grad_outputs step shape " + go.shape_string() + " expected [" +
                std::to_string(batch) + " x " + std::to_string(top_h) + "]");
    Matrix from_above = go;
    if (!cache.output_masks[t].empty()) multiply_inplace(from_above, cache.output_masks[t]);

    for (std::size_t l = num_layers; l-- > 0;) {
      Matrix dh = carry.layers[l].h;
      {
        auto d = dh.values();
        auto a = from_above.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += a[i];
      }
      CellGrads cg =
          lstm_cell_backward(layers[l], cache.cells[t][l], dh, carry.layers[l].c, out.grads[l]);
      carry.layers[l].h = std::move(cg.dh_prev);
      carry.layers[l].c = std::move(cg.dc_prev);
      if (!cache.input_masks[t].empty() && !cache.input_masks[t][l].empty())
        multiply_inplace(cg.dx, cache.input_masks[t][l]);
      from_above = std::move(cg.dx);
    }
    out.grad_inputs[t] = std::move(from_above);
  }
  out.grad_init_state = std::move(carry);
  return out;
}

}  // namespace ncelm
