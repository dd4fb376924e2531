#include "ncelm/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "ncelm/kernels.hpp"

namespace ncelm {

ModelParams ModelParams::zeros(const ModelShape& shape) {
  if (shape.vocab < 2 || shape.embed == 0 || shape.hidden == 0 || shape.layers == 0)
    throw std::invalid_argument("ModelParams: invalid shape");
  ModelParams p;
  p.embedding = Matrix(shape.vocab, shape.embed);
  for (std::size_t l = 0; l < shape.layers; ++l)
    p.layers.emplace_back(l == 0 ? shape.embed : shape.hidden, shape.hidden);
  p.head = HeadParams(shape.vocab, shape.hidden);
  return p;
}

ModelShape ModelParams::shape() const {
  return {embedding.rows(), embedding.cols(), head.hidden_size(), layers.size()};
}

std::vector<ModelParams::TensorRef> ModelParams::tensors() {
  std::vector<TensorRef> out;
  out.push_back({"embedding", &embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "w_x", &layers[l].w_x});
    out.push_back({p + "w_h", &layers[l].w_h});
    out.push_back({p + "b", &layers[l].b});
  }
  out.push_back({"head.theta", &head.theta});
  out.push_back({"head.bias", &head.bias});
  out.push_back({"head.ln_z", &head.ln_z});
  return out;
}

std::vector<ModelParams::ConstTensorRef> ModelParams::tensors() const {
  std::vector<ConstTensorRef> out;
  for (auto& t : const_cast<ModelParams*>(this)->tensors()) out.push_back({t.name, t.tensor});
  return out;
}

Matrix RowGrad::expand(std::size_t num_rows, std::size_t cols) const {
  if (dense && !values.empty()) return Matrix(num_rows, cols, std::vector<double>(
                                                                  values.values().begin(),
                                                                  values.values().end()));
  Matrix out(num_rows, cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = values.row(i);
    auto dst = out.row(rows[i]);
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  return out;
}

void Gradients::for_each(
    const std::function<void(const std::string&, std::span<double>)>& fn) {
  if (train_embedding) fn("embedding", embedding.values.values());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    fn(p + "w_x", layers[l].w_x.values());
    fn(p + "w_h", layers[l].w_h.values());
    fn(p + "b", layers[l].b.values());
  }
  fn("head.theta", theta.values.values());
  fn("head.bias", bias.values.values());
  fn("head.ln_z", ln_z.values());
}

void Gradients::for_each(
    const std::function<void(const std::string&, std::span<const double>)>& fn) const {
  const_cast<Gradients*>(this)->for_each(
      [&](const std::string& name, std::span<double> v) { fn(name, v); });
}

ModelParams Gradients::to_dense(const ModelShape& shape) const {
  ModelParams d = ModelParams::zeros(shape);
  if (train_embedding) d.embedding = embedding.expand(shape.vocab, shape.embed);
  for (std::size_t l = 0; l < layers.size() && l < d.layers.size(); ++l) d.layers[l] = layers[l];
  d.head.theta = theta.expand(shape.vocab, shape.hidden);
  Matrix b = bias.expand(shape.vocab, 1);
  d.head.bias = Matrix(1, shape.vocab, std::vector<double>(b.values().begin(), b.values().end()));
  d.head.ln_z = ln_z;
  return d;
}

std::vector<WordId> batch_targets(const Batch& batch) {
  std::vector<WordId> out(batch.positions());
  for (std::size_t t = 0; t < batch.steps; ++t)
    for (std::size_t b = 0; b < batch.batch_size; ++b)
      out[t * batch.batch_size + b] = batch.target(b, t);
  return out;
}

namespace {

std::vector<Matrix> embed_inputs(const ModelParams& params, const Batch& batch) {
  const std::size_t dim = params.embedding.cols();
  std::vector<Matrix> inputs;
  inputs.reserve(batch.steps);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    Matrix x(batch.batch_size, dim);
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
      const WordId id = batch.input(b, t);
      if (id >= params.embedding.rows())
        throw std::out_of_range("input id " + std::to_string(id) + " outside vocabulary");
      auto src = params.embedding.row(id);
      std::copy(src.begin(), src.end(), x.row(b).begin());
    }
    inputs.push_back(std::move(x));
  }
  return inputs;
}

Matrix stack_rows(const std::vector<Matrix>& steps) {
  const std::size_t b = steps.front().rows();
  const std::size_t h = steps.front().cols();
  Matrix v(steps.size() * b, h);
  for (std::size_t t = 0; t < steps.size(); ++t)
    std::copy(steps[t].values().begin(), steps[t].values().end(),
              v.values().begin() + static_cast<std::ptrdiff_t>(t * b * h));
  return v;
}

std::vector<Matrix> split_rows(const Matrix& v, std::size_t steps, std::size_t batch) {
  std::vector<Matrix> out;
  out.reserve(steps);
  const std::size_t h = v.cols();
  for (std::size_t t = 0; t < steps; ++t) {
    auto first = v.values().begin() + static_cast<std::ptrdiff_t>(t * batch * h);
    out.emplace_back(batch, h, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(
                                                                    batch * h)));
  }
  return out;
}

}  // namespace

Matrix context_vectors(const ModelParams& params, const Batch& batch, const LstmState& init,
                       LstmState* final_state) {
  RngStream unused(0);
  StackForward fwd = stack_forward(params.layers, embed_inputs(params, batch), init,
                                   DropoutSpec{0.0}, Mode::kEval, unused);
  if (final_state) *final_state = std::move(fwd.final_state);
  return stack_rows(fwd.outputs);
}

BatchResult model_objective(const ModelParams& params, const Batch& batch, const LstmState& init,
                            const Objective& objective, const BatchOptions& options,
                            RngStream dropout_rng, Gradients* grads,
                            RngStream* dropout_rng_out) {
  StackForward fwd = stack_forward(params.layers, embed_inputs(params, batch), init,
                                   options.dropout, options.mode, dropout_rng);
  if (dropout_rng_out) *dropout_rng_out = dropout_rng;
  const Matrix v = stack_rows(fwd.outputs);
  const std::vector<WordId> targets = batch_targets(batch);

  BatchResult result;
  result.final_state = std::move(fwd.final_state);

  HeadGrads head_grads;
  if (std::holds_alternative<SoftmaxObjective>(objective)) {
    SoftmaxOutput out = softmax_log_probs(params.head, v, targets);
    result.loss = out.nll;
    if (grads) head_grads = softmax_backward(params.head, v, targets, out);
  } else {
    const auto& nce = std::get<NceObjective>(objective);
    if (!nce.sample) throw std::invalid_argument("model_objective: NCE objective without sample");
    if (nce.sample->targets != targets)
      throw std::invalid_argument("model_objective: NCE sample targets do not match the batch");
    NceOutput out = nce_loss_and_grad(params.head, v, *nce.sample, nce.zmode, grads != nullptr);
    result.loss = out.loss;
    if (grads) head_grads = std::move(out.grads);
  }
  if (!grads) return result;

  StackBackward back =
      stack_backward(params.layers, fwd.cache, split_rows(head_grads.v, batch.steps,
                                                          batch.batch_size));
  grads->layers = std::move(back.grads);
  grads->train_embedding = options.train_embedding;

  // Embedding rows: sorted unique input ids.
  if (options.train_embedding) {
    std::vector<WordId> ids(batch.x);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    RowGrad& eg = grads->embedding;
    eg.dense = false;
    eg.rows = ids;
    eg.values = Matrix(ids.size(), params.embedding.cols());
    for (std::size_t t = 0; t < batch.steps; ++t) {
      for (std::size_t b = 0; b < batch.batch_size; ++b) {
        const WordId id = batch.input(b, t);
        const std::size_t slot = static_cast<std::size_t>(
            std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
        auto dst = eg.values.row(slot);
        auto src = back.grad_inputs[t].row(b);
        for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
      }
    }
  } else {
    grads->embedding = RowGrad{};
  }

  grads->theta.dense = head_grads.dense;
  grads->theta.rows = head_grads.touched_rows;
  grads->theta.values = std::move(head_grads.theta);
  grads->bias.dense = head_grads.dense;
  grads->bias.rows = head_grads.touched_rows;
  grads->bias.values = Matrix(head_grads.bias.cols(), 1,
                              std::vector<double>(head_grads.bias.values().begin(),
                                                  head_grads.bias.values().end()));
  grads->ln_z = head_grads.ln_z;
  return result;
}

}  // namespace ncelm
