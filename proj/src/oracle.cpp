#include "ncelm/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ncelm/heads.hpp"
#include "ncelm/lstm.hpp"
#include "ncelm/model.hpp"

namespace ncelm::oracle {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelativeFloor});
}

std::vector<double> finite_diff_grad(const ScalarFn& loss, std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  const double base = loss(point);
  if (loss(point) != base)
    throw std::runtime_error("finite_diff_grad: loss is not deterministic");
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double up = loss(point);
    point[i] = orig - h;
    const double down = loss(point);
    point[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_err);
  return m;
}

GradCheckReport check_gradients(const std::string& component, std::vector<GradCheckEntry> entries,
                                const std::function<double()>& loss, double h) {
  GradCheckReport report;
  report.component = component;
  report.h = h;
  for (auto& e : entries) {
    if (e.analytic.rows() != e.values->rows() || e.analytic.cols() != e.values->cols())
      throw std::invalid_argument("check_gradients: analytic gradient for " + e.name +
                                  " has shape " + e.analytic.shape_string() + ", tensor is " +
                                  e.values->shape_string());
    Matrix& target = *e.values;
    const std::vector<double> saved(target.values().begin(), target.values().end());
    auto fn = [&](std::span<const double> x) {
      std::copy(x.begin(), x.end(), target.values().begin());
      return loss();
    };
    const std::vector<double> numeric = finite_diff_grad(fn, saved, h);
    std::copy(saved.begin(), saved.end(), target.values().begin());

    TensorCheck tc;
    tc.name = e.name;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double err = relative_error(e.analytic.values()[i], numeric[i]);
      if (err > tc.max_rel_err || i == 0) {
        tc.max_rel_err = std::max(err, tc.max_rel_err);
        tc.worst_index = i;
        tc.analytic = e.analytic.values()[i];
        tc.numeric = numeric[i];
      }
    }
    report.tensors.push_back(std::move(tc));
  }
  return report;
}

namespace {

void fill_uniform(Matrix& m, RngStream& rng, double half) {
  for (double& x : m.values()) x = rng.uniform(-half, half);
}

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng, double half) {
  Matrix m(r, c);
  fill_uniform(m, rng, half);
  return m;
}

double weighted_sum(const Matrix& m, const Matrix& w) {
  return dot(m.values(), w.values());
}

GradCheckReport check_cell(RngStream& rng) {
  const std::size_t hidden = 4, in = 3, batch = 2;
  LstmLayerParams p(in, hidden);
  fill_uniform(p.w_x, rng, 0.5);
  fill_uniform(p.w_h, rng, 0.5);
  fill_uniform(p.b, rng, 0.5);
  Matrix x = random_matrix(batch, in, rng, 1.0);
  LayerState s{random_matrix(batch, hidden, rng, 1.0), random_matrix(batch, hidden, rng, 1.0)};
  const Matrix wh = random_matrix(batch, hidden, rng, 1.0);
  const Matrix wc = random_matrix(batch, hidden, rng, 1.0);

  auto loss = [&] {
    CellStep step = lstm_cell_forward(p, x, s);
    return weighted_sum(step.state.h, wh) + weighted_sum(step.state.c, wc);
  };
  CellStep step = lstm_cell_forward(p, x, s);
  LstmLayerParams g(in, hidden);
  CellGrads cg = lstm_cell_backward(p, step.cache, wh, wc, g);
  return check_gradients("lstm_cell",
                         {{"w_x", &p.w_x, g.w_x},
                          {"w_h", &p.w_h, g.w_h},
                          {"b", &p.b, g.b},
                          {"x", &x, cg.dx},
                          {"h_prev", &s.h, cg.dh_prev},
                          {"c_prev", &s.c, cg.dc_prev}},
                         loss);
}

GradCheckReport check_stack(RngStream& rng) {
  const std::size_t hidden = 8, in = 5, steps = 4, batch = 2;
  std::vector<LstmLayerParams> layers;
  for (std::size_t l = 0; l < 2; ++l) {
    LstmLayerParams p(l == 0 ? in : hidden, hidden);
    fill_uniform(p.w_x, rng, 0.5);
    fill_uniform(p.w_h, rng, 0.5);
    fill_uniform(p.b, rng, 0.5);
    layers.push_back(std::move(p));
  }
  std::vector<Matrix> inputs;
  std::vector<Matrix> weights;
  for (std::size_t t = 0; t < steps; ++t) {
    inputs.push_back(random_matrix(batch, in, rng, 1.0));
    weights.push_back(random_matrix(batch, hidden, rng, 1.0));
  }
  LstmState init = LstmState::zeros(2, batch, hidden);
  for (auto& l : init.layers) {
    fill_uniform(l.h, rng, 0.5);
    fill_uniform(l.c, rng, 0.5);
  }
  const DropoutSpec dropout{0.25};
  const RngStream mask_rng = RngStream::for_role(rng.next_u64(), StreamRole::kDropout);

  auto loss = [&] {
    RngStream r = mask_rng;
    StackForward f = stack_forward(layers, inputs, init, dropout, Mode::kTrain, r);
    double s = 0.0;
    for (std::size_t t = 0; t < steps; ++t) s += weighted_sum(f.outputs[t], weights[t]);
    return s;
  };
  RngStream r = mask_rng;
  StackForward f = stack_forward(layers, inputs, init, dropout, Mode::kTrain, r);
  StackBackward b = stack_backward(layers, f.cache, weights);

  std::vector<GradCheckEntry> entries;
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    entries.push_back({p + "w_x", &layers[l].w_x, b.grads[l].w_x});
    entries.push_back({p + "w_h", &layers[l].w_h, b.grads[l].w_h});
    entries.push_back({p + "b", &layers[l].b, b.grads[l].b});
  }
  for (std::size_t t = 0; t < steps; ++t)
    entries.push_back({"input" + std::to_string(t), &inputs[t], b.grad_inputs[t]});
  for (std::size_t l = 0; l < 2; ++l) {
    entries.push_back({"init_h" + std::to_string(l), &init.layers[l].h,
                       b.grad_init_state.layers[l].h});
    entries.push_back({"init_c" + std::to_string(l), &init.layers[l].c,
                       b.grad_init_state.layers[l].c});
  }
  return check_gradients("lstm_stack", std::move(entries), loss);
}

HeadParams random_head(std::size_t vocab, std::size_t hidden, RngStream& rng) {
  HeadParams h(vocab, hidden);
  fill_uniform(h.theta, rng, 1.0);
  fill_uniform(h.bias, rng, 1.0);
  return h;
}

std::vector<WordId> random_ids(std::size_t n, std::size_t vocab, RngStream& rng) {
  std::vector<WordId> out(n);
  for (auto& id : out) id = static_cast<WordId>(rng.below(vocab));
  return out;
}

GradCheckReport check_softmax(RngStream& rng) {
  const std::size_t vocab = 12, hidden = 6, n = 5;
  HeadParams head = random_head(vocab, hidden, rng);
  Matrix v = random_matrix(n, hidden, rng, 1.0);
  const std::vector<WordId> targets = random_ids(n, vocab, rng);
  auto loss = [&] { return softmax_log_probs(head, v, targets).nll; };
  HeadGrads g = softmax_backward(head, v, targets);
  return check_gradients("softmax_head",
                         {{"theta", &head.theta, g.theta},
                          {"bias", &head.bias, g.bias},
                          {"v", &v, g.v}},
                         loss);
}

GradCheckReport check_nce(RngStream& rng, ZMode zmode, NoiseSharing sharing) {
  const std::size_t vocab = 12, hidden = 6, n = 5;
  HeadParams head = random_head(vocab, hidden, rng);
  if (zmode == ZMode::kLearned) head.ln_z(0, 0) = 0.7;
  Matrix v = random_matrix(n, hidden, rng, 1.0);
  const std::vector<WordId> targets = random_ids(n, vocab, rng);
  const NoiseDistribution dist = build_noise_from_counts(
      std::vector<std::uint64_t>(vocab, 1), NoiseSpec{NoiseKind::kZipf, 1.0, 1.0});
  NoiseConfig cfg;
  cfg.k = 4;
  cfg.sharing = sharing;
  const NceBatchSample sample =
      make_nce_sample(targets, dist, sample_noise(dist, cfg, n, rng));
  auto loss = [&] { return nce_loss(head, v, sample, zmode); };
  HeadGrads g = nce_backward(head, v, sample, zmode);
  std::vector<GradCheckEntry> entries = {{"theta", &head.theta, g.dense_theta(vocab)},
                                         {"bias", &head.bias, g.dense_bias(vocab)},
                                         {"v", &v, g.v}};
  if (zmode == ZMode::kLearned) entries.push_back({"ln_z", &head.ln_z, g.ln_z});
  std::string name = std::string("nce_head_") + (zmode == ZMode::kLearned ? "learned_z" : "z1") +
                     (sharing == NoiseSharing::kPerBatch ? "_shared" : "_per_position");
  return check_gradients(name, std::move(entries), loss);
}

GradCheckReport check_full_model(RngStream& rng, bool nce) {
  const ModelShape shape{12, 5, 6, 2};
  ModelParams params = ModelParams::zeros(shape);
  for (auto& t : params.tensors()) fill_uniform(*t.tensor, rng, 0.8);
  params.head.ln_z(0, 0) = nce ? 0.3 : 0.0;

  Batch batch;
  batch.batch_size = 2;
  batch.steps = 4;
  batch.x = random_ids(8, shape.vocab, rng);
  batch.y = random_ids(8, shape.vocab, rng);
  LstmState init = LstmState::zeros(2, 2, shape.hidden);

  NceBatchSample sample;
  Objective objective = SoftmaxObjective{};
  if (nce) {
    const NoiseDistribution dist = build_noise_from_counts(
        std::vector<std::uint64_t>(shape.vocab, 1), NoiseSpec{NoiseKind::kUniform});
    NoiseConfig cfg;
    cfg.k = 4;
    const auto targets = batch_targets(batch);
    sample = make_nce_sample(targets, dist, sample_noise(dist, cfg, targets.size(), rng));
    objective = NceObjective{&sample, ZMode::kLearned};
  }
  BatchOptions options;
  options.dropout = DropoutSpec{0.2};
  const RngStream mask_rng = RngStream::for_role(rng.next_u64(), StreamRole::kDropout);

  auto loss = [&] {
    return model_objective(params, batch, init, objective, options, mask_rng, nullptr).loss;
  };
  Gradients g;
  model_objective(params, batch, init, objective, options, mask_rng, &g);
  ModelParams dense = g.to_dense(shape);
  std::vector<GradCheckEntry> entries;
  auto dense_refs = dense.tensors();
  auto refs = params.tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!nce && refs[i].name == "head.ln_z") continue;
    entries.push_back({refs[i].name, refs[i].tensor, *dense_refs[i].tensor});
  }
  return check_gradients(nce ? "model_nce_learned_z" : "model_softmax", std::move(entries), loss);
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 3);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<GradCheckReport> out;
  out.push_back(check_cell(rng));
  out.push_back(check_stack(rng));
  out.push_back(check_softmax(rng));
  out.push_back(check_nce(rng, ZMode::kConstant, NoiseSharing::kPerBatch));
  out.push_back(check_nce(rng, ZMode::kConstant, NoiseSharing::kPerPosition));
  out.push_back(check_nce(rng, ZMode::kLearned, NoiseSharing::kPerBatch));
  out.push_back(check_nce(rng, ZMode::kLearned, NoiseSharing::kPerPosition));
  out.push_back(check_full_model(rng, false));
  out.push_back(check_full_model(rng, true));
  return out;
}

std::string reports_csv(const std::vector<GradCheckReport>& reports) {
  std::ostringstream os;
  os << "tensor,max_rel_err,coord,h\n";
  for (const auto& r : reports)
    for (const auto& t : r.tensors)
      os << r.component << '/' << t.name << ',' << fmt(t.max_rel_err) << ',' << t.worst_index
         << ',' << fmt(r.h) << '\n';
  return os.str();
}

std::string reports_text(const std::vector<GradCheckReport>& reports, double tolerance) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << (r.passed(tolerance) ? "PASS " : "FAIL ") << r.component
       << "  max_rel_err=" << fmt(r.max_rel_err()) << '\n';
    for (const auto& t : r.tensors)
      os << "     " << t.name << "  " << fmt(t.max_rel_err) << "  at " << t.worst_index
         << " (analytic " << fmt(t.analytic) << ", numeric " << fmt(t.numeric) << ")\n";
  }
  return os.str();
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  return kl;
}

namespace {

inline double log_sigmoid(double x) { return -log_add_exp(0.0, -x); }

void check_consistency_inputs(std::span<const double> logits, std::span<const double> data,
                              std::span<const double> noise, std::size_t k) {
  if (logits.size() != data.size() || data.size() != noise.size())
    throw std::invalid_argument("nce consistency: length mismatch");
  if (k == 0) throw std::invalid_argument("nce consistency: k must be >= 1");
}

}  // namespace

double nce_expected_objective(std::span<const double> logits, std::span<const double> data,
                              std::span<const double> noise, std::size_t k) {
  check_consistency_inputs(logits, data, noise, k);
  const double kd = static_cast<double>(k);
  double j = 0.0;
  for (std::size_t w = 0; w < logits.size(); ++w) {
    const double x = logits[w] - std::log(kd * noise[w]);
    j += data[w] * log_sigmoid(x) + kd * noise[w] * log_sigmoid(-x);
  }
  return j;
}

std::vector<double> nce_expected_gradient(std::span<const double> logits,
                                          std::span<const double> data,
                                          std::span<const double> noise, std::size_t k) {
  check_consistency_inputs(logits, data, noise, k);
  const double kd = static_cast<double>(k);
  std::vector<double> g(logits.size());
  for (std::size_t w = 0; w < logits.size(); ++w) {
    const double x = logits[w] - std::log(kd * noise[w]);
    const double s = std::exp(log_sigmoid(x));
    const double not_s = std::exp(log_sigmoid(-x));
    g[w] = data[w] * not_s - kd * noise[w] * s;
  }
  return g;
}

ConsistencyFit nce_consistency_fit(std::span<const double> counts, const NoiseDistribution& noise,
                                   std::size_t k, std::size_t steps, double eta,
                                   double grad_tol) {
  const std::size_t n = counts.size();
  if (n == 0 || n > 64) throw std::invalid_argument("nce_consistency_fit: need 1..64 words");
  if (noise.size() != n) throw std::invalid_argument("nce_consistency_fit: noise size mismatch");
  double total = 0.0;
  for (double c : counts) {
    if (!(c > 0.0)) throw std::invalid_argument("nce_consistency_fit: counts must be positive");
    total += c;
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = counts[i] / total;

  ConsistencyFit fit;
  fit.k = k;
  fit.logits.assign(n, 0.0);
  std::vector<double> g;
  for (std::size_t s = 0; s < steps; ++s) {
    g = nce_expected_gradient(fit.logits, data, noise.probs(), k);
    for (std::size_t i = 0; i < n; ++i) fit.logits[i] += eta * g[i];
  }
  fit.steps = steps;
  g = nce_expected_gradient(fit.logits, data, noise.probs(), k);
  fit.grad_norm = std::sqrt(squared_norm(g));
  fit.converged = fit.grad_norm <= grad_tol;

  const double lz = log_sum_exp(fit.logits);
  fit.distribution.resize(n);
  fit.self_normalisation = std::exp(lz);
  for (std::size_t i = 0; i < n; ++i) fit.distribution[i] = std::exp(fit.logits[i] - lz);
  fit.kl_to_mle = kl_divergence(fit.distribution, data);
  return fit;
}

GradientBiasReport sampled_vs_exact_nce(std::span<const double> counts,
                                        std::span<const double> logits,
                                        const NoiseDistribution& noise, std::size_t k,
                                        std::size_t num_resamples, RngStream& rng) {
  const std::size_t n = counts.size();
  if (logits.size() != n || noise.size() != n)
    throw std::invalid_argument("sampled_vs_exact_nce: length mismatch");
  if (num_resamples == 0) throw std::invalid_argument("sampled_vs_exact_nce: no resamples");

  std::vector<WordId> targets;
  double total = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    const double c = counts[w];
    if (c < 0.0 || c != std::floor(c))
      throw std::invalid_argument("sampled_vs_exact_nce: counts must be whole numbers");
    targets.insert(targets.end(), static_cast<std::size_t>(c), static_cast<WordId>(w));
    total += c;
  }
  if (targets.empty()) throw std::invalid_argument("sampled_vs_exact_nce: empty data");
  std::vector<double> data(n);
  for (std::size_t w = 0; w < n; ++w) data[w] = counts[w] / total;

  HeadParams head(n, 1);
  for (std::size_t w = 0; w < n; ++w) head.theta(w, 0) = logits[w];
  const Matrix v(targets.size(), 1, 1.0);

  GradientBiasReport report;
  report.resamples = num_resamples;
  report.exact = nce_expected_gradient(logits, data, noise.probs(), k);
  for (double& g : report.exact) g = -g;  // loss = -J
  report.mean_sampled.assign(n, 0.0);

  NoiseConfig cfg;
  cfg.k = k;
  cfg.sharing = NoiseSharing::kPerPosition;
  for (std::size_t r = 0; r < num_resamples; ++r) {
    const NceBatchSample sample =
        make_nce_sample(targets, noise, sample_noise(noise, cfg, targets.size(), rng));
    const HeadGrads g = nce_backward(head, v, sample, ZMode::kConstant);
    for (std::size_t i = 0; i < g.touched_rows.size(); ++i)
      report.mean_sampled[g.touched_rows[i]] += g.theta(i, 0);
  }
  double sq = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    report.mean_sampled[w] /= static_cast<double>(num_resamples);
    const double d = report.mean_sampled[w] - report.exact[w];
    report.max_abs_dev = std::max(report.max_abs_dev, std::abs(d));
    sq += d * d;
  }
  report.rms_dev = std::sqrt(sq / static_cast<double>(n));
  return report;
}

}  // namespace ncelm::oracle
