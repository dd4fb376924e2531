#include "ncelm/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncelm/kernels.hpp"

namespace ncelm {
namespace {

void check_inputs(const HeadParams& head, const Matrix& v, std::size_t positions) {
  head.validate();
  if (v.cols() != head.hidden_size())
    throw std::invalid_argument("head: context width " + std::to_string(v.cols()) +
                                " does not match theta " + head.theta.shape_string());
  if (v.rows() != positions)
    throw std::invalid_argument("head: " + std::to_string(v.rows()) + " context rows for " +
                                std::to_string(positions) + " targets");
  if (positions == 0) throw std::invalid_argument("head: no positions");
}

void check_targets(std::span<const WordId> targets, std::size_t vocab) {
  for (WordId t : targets)
    if (t >= vocab)
      throw std::out_of_range("target id " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(vocab));
}

// ln P(D=1) and ln P(D=0) for log model score `ls` against ln(k P_n) `lkp`.
struct LogPosteriors {
  double data;
  double noise;
};

inline LogPosteriors log_posteriors(double ls, double lkp) {
  const double denom = log_add_exp(ls, lkp);
  return {ls - denom, lkp - denom};
}

}  // namespace

HeadParams::HeadParams(std::size_t vocab, std::size_t hidden)
    : theta(vocab, hidden), bias(1, vocab), ln_z(1, 1) {}

void HeadParams::validate() const {
  if (theta.rows() < 2)
    throw std::invalid_argument("head: vocabulary must have at least 2 words");
  if (bias.rows() != 1 || bias.cols() != theta.rows())
    throw std::invalid_argument("head: bias " + bias.shape_string() + " does not match theta " +
                                theta.shape_string());
  if (ln_z.rows() != 1 || ln_z.cols() != 1) throw std::invalid_argument("head: ln_z must be 1 x 1");
}

Matrix HeadGrads::dense_theta(std::size_t vocab) const {
  if (dense) return theta;
  Matrix out(vocab, theta.cols());
  for (std::size_t i = 0; i < touched_rows.size(); ++i)
    std::copy(theta.row(i).begin(), theta.row(i).end(), out.row(touched_rows[i]).begin());
  return out;
}

Matrix HeadGrads::dense_bias(std::size_t vocab) const {
  if (dense) return bias;
  Matrix out(1, vocab);
  for (std::size_t i = 0; i < touched_rows.size(); ++i) out(0, touched_rows[i]) = bias(0, i);
  return out;
}

SoftmaxOutput softmax_log_probs(const HeadParams& head, const Matrix& v,
                                std::span<const WordId> targets) {
  check_inputs(head, v, targets.size());
  check_targets(targets, head.vocab_size());
  SoftmaxOutput out;
  out.log_probs = Matrix(v.rows(), head.vocab_size());
  kernels::gemm_nt(v, head.theta, out.log_probs, false);
  kernels::add_row_bias(out.log_probs, head.bias.values());
  std::vector<double> log_partition(v.rows());
  kernels::log_softmax_rows(out.log_probs, log_partition);
  out.target_log_probs.resize(targets.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out.target_log_probs[i] = out.log_probs(i, targets[i]);
    sum -= out.target_log_probs[i];
  }
  out.nll = sum / static_cast<double>(targets.size());
  return out;
}

HeadGrads softmax_backward(const HeadParams& head, const Matrix& v,
                           std::span<const WordId> targets) {
  return softmax_backward(head, v, targets, softmax_log_probs(head, v, targets));
}

HeadGrads softmax_backward(const HeadParams& head, const Matrix& v,
                           std::span<const WordId> targets, const SoftmaxOutput& forward) {
  check_inputs(head, v, targets.size());
  check_targets(targets, head.vocab_size());
  const std::size_t n = targets.size();
  const std::size_t vocab = head.vocab_size();
  if (forward.log_probs.rows() != n || forward.log_probs.cols() != vocab)
    throw std::invalid_argument("softmax_backward: forward pass does not match inputs");

  // d(mean NLL)/d logits = (softmax - onehot) / n
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix dlogits(n, vocab);
  for (std::size_t i = 0; i < n; ++i) {
    double* d = dlogits.data() + i * vocab;
    kernels::exp_scaled(forward.log_probs.row(i), {d, vocab}, inv_n);
    d[targets[i]] -= inv_n;
  }

  HeadGrads g;
  g.dense = true;
  g.theta = Matrix(vocab, head.hidden_size());
  kernels::gemm_tn(dlogits, v, g.theta, false);
  g.bias = Matrix(1, vocab);
  kernels::sum_rows(dlogits, g.bias.values());
  g.ln_z = Matrix(1, 1);
  g.v = Matrix(n, head.hidden_size());
  kernels::gemm_nn(dlogits, head.theta, g.v, false);
  return g;
}

NcePosteriors nce_posteriors(double p_model, std::size_t k, double p_noise) {
  if (!(p_noise > 0.0)) throw std::invalid_argument("nce_posteriors: noise probability must be > 0");
  if (!(p_model >= 0.0)) throw std::invalid_argument("nce_posteriors: model probability must be >= 0");
  if (k == 0) throw std::invalid_argument("nce_posteriors: k must be >= 1");
  const double data = p_model / (p_model + static_cast<double>(k) * p_noise);
  return {data, 1.0 - data};
}

void NceBatchSample::validate(std::size_t vocab) const {
  if (noise.k == 0) throw std::invalid_argument("nce: k must be >= 1");
  if (target_noise_probs.size() != targets.size())
    throw std::invalid_argument("nce: target noise probabilities do not match targets");
  const std::size_t expect = noise.sharing == NoiseSharing::kPerBatch
                                 ? noise.k
                                 : noise.k * targets.size();
  if (noise.ids.size() != expect || noise.probs.size() != expect)
    throw std::invalid_argument("nce: expected " + std::to_string(expect) + " noise ids, got " +
                                std::to_string(noise.ids.size()));
  check_targets(targets, vocab);
  check_targets(noise.ids, vocab);
  for (double p : target_noise_probs)
    if (!(p > 0.0)) throw std::invalid_argument("nce: noise probability must be > 0");
  for (double p : noise.probs)
    if (!(p > 0.0)) throw std::invalid_argument("nce: noise probability must be > 0");
}

NceBatchSample make_nce_sample(std::span<const WordId> targets, const NoiseDistribution& dist,
                               NoiseDraw noise) {
  NceBatchSample s;
  s.targets.assign(targets.begin(), targets.end());
  s.target_noise_probs.reserve(targets.size());
  for (WordId t : targets) {
    if (t >= dist.size())
      throw std::out_of_range("make_nce_sample: target id " + std::to_string(t) +
                              " outside noise support");
    s.target_noise_probs.push_back(dist.prob(t));
  }
  s.noise = std::move(noise);
  return s;
}

NceOutput nce_loss_and_grad(const HeadParams& head, const Matrix& v,
                            const NceBatchSample& sample, ZMode zmode, bool want_grads) {
  const std::size_t n = sample.positions();
  check_inputs(head, v, n);
  sample.validate(head.vocab_size());
  const std::size_t hidden = head.hidden_size();
  const std::size_t k = sample.noise.k;
  const double ln_k = std::log(static_cast<double>(k));
  const double ln_z = zmode == ZMode::kLearned ? head.log_z() : 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool shared = sample.noise.sharing == NoiseSharing::kPerBatch;

  // Compact row set: sorted unique ids over targets and noise.
  std::vector<WordId> rows(sample.targets);
  rows.insert(rows.end(), sample.noise.ids.begin(), sample.noise.ids.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  auto slot = [&rows](WordId id) {
    return static_cast<std::size_t>(std::lower_bound(rows.begin(), rows.end(), id) - rows.begin());
  };

  NceOutput out;
  HeadGrads& g = out.grads;
  if (want_grads) {
    g.dense = false;
    g.touched_rows = rows;
    g.theta = Matrix(rows.size(), hidden);
    g.bias = Matrix(1, rows.size());
    g.ln_z = Matrix(1, 1);
    g.v = Matrix(n, hidden);
  }

  // Noise scores: one n x k block when shared, otherwise per-position dots.
  Matrix noise_theta;
  Matrix noise_scores;
  if (shared) {
    noise_theta = Matrix(k, hidden);
    for (std::size_t j = 0; j < k; ++j) {
      auto src = head.theta.row(sample.noise.ids[j]);
      std::copy(src.begin(), src.end(), noise_theta.row(j).begin());
    }
    noise_scores = Matrix(n, k);
    kernels::gemm_nt(v, noise_theta, noise_scores, false);
  }

  double loss = 0.0;
  double d_ln_z = 0.0;
  Matrix d_noise_scores = shared && want_grads ? Matrix(n, k) : Matrix();

  for (std::size_t i = 0; i < n; ++i) {
    auto vi = v.row(i);
    const WordId t = sample.targets[i];
    const double ls_t = dot(head.theta.row(t), vi) + head.bias(0, t) - ln_z;
    const double lkp_t = ln_k + std::log(sample.target_noise_probs[i]);
    const LogPosteriors pt = log_posteriors(ls_t, lkp_t);
    loss -= pt.data;
    if (want_grads) {
      // d(-ln P(D=1))/d score = -P(D=0)
      const double dscore = -std::exp(pt.noise) * inv_n;
      const std::size_t r = slot(t);
      auto gt = g.theta.row(r);
      auto gv = g.v.row(i);
      auto th = head.theta.row(t);
      for (std::size_t h = 0; h < hidden; ++h) {
        gt[h] += dscore * vi[h];
        gv[h] += dscore * th[h];
      }
      g.bias(0, r) += dscore;
      d_ln_z -= dscore;
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = shared ? j : i * k + j;
      const WordId w = sample.noise.ids[idx];
      const double raw = shared ? noise_scores(i, j) : dot(head.theta.row(w), vi);
      const double ls = raw + head.bias(0, w) - ln_z;
      const double lkp = ln_k + std::log(sample.noise.probs[idx]);
      const LogPosteriors pn = log_posteriors(ls, lkp);
      loss -= pn.noise;
      if (want_grads) {
        // d(-ln P(D=0))/d score = P(D=1)
        const double dscore = std::exp(pn.data) * inv_n;
        const std::size_t r = slot(w);
        g.bias(0, r) += dscore;
        d_ln_z -= dscore;
        if (shared) {
          d_noise_scores(i, j) = dscore;
        } else {
          auto gw = g.theta.row(r);
          auto gv = g.v.row(i);
          auto th = head.theta.row(w);
          for (std::size_t h = 0; h < hidden; ++h) {
            gw[h] += dscore * vi[h];
            gv[h] += dscore * th[h];
          }
        }
      }
    }
  }
  out.loss = loss * inv_n;

  if (want_grads) {
    if (shared) {
      Matrix d_noise_theta(k, hidden);
      kernels::gemm_tn(d_noise_scores, v, d_noise_theta, false);
      for (std::size_t j = 0; j < k; ++j) {
        auto dst = g.theta.row(slot(sample.noise.ids[j]));
        auto src = d_noise_theta.row(j);
        for (std::size_t h = 0; h < hidden; ++h) dst[h] += src[h];
      }
      kernels::gemm_nn(d_noise_scores, noise_theta, g.v, true);
    }
    g.ln_z(0, 0) = zmode == ZMode::kLearned ? d_ln_z : 0.0;
  }
  return out;
}

double nce_loss(const HeadParams& head, const Matrix& v, const NceBatchSample& sample,
                ZMode zmode) {
  return nce_loss_and_grad(head, v, sample, zmode, false).loss;
}

HeadGrads nce_backward(const HeadParams& head, const Matrix& v, const NceBatchSample& sample,
                       ZMode zmode) {
  return nce_loss_and_grad(head, v, sample, zmode, true).grads;
}

}  // namespace ncelm
