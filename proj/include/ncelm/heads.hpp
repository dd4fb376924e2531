#ifndef NCELM_HEADS_HPP
#define NCELM_HEADS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/noise.hpp"
#include "ncelm/tensor.hpp"

namespace ncelm {

enum class ZMode { kConstant, kLearned };

// Output word vectors shared by both heads. The score of word w for the
// context vector v is theta_w . v + bias_w.
struct HeadParams {
  Matrix theta;  // |V| x H
  Matrix bias;   // 1 x |V|
  Matrix ln_z;   // 1 x 1; stays 0 under ZMode::kConstant

  HeadParams() = default;
  HeadParams(std::size_t vocab, std::size_t hidden);

  std::size_t vocab_size() const { return theta.rows(); }
  std::size_t hidden_size() const { return theta.cols(); }
  double log_z() const { return ln_z(0, 0); }
  void validate() const;
};

// Head gradients. Softmax produces dense theta (|V| x H) and bias (1 x |V|).
// NCE produces compact ones: row i of theta and column i of bias belong to
// word touched_rows[i] (sorted, unique); every other row is exactly zero.
struct HeadGrads {
  Matrix theta;
  Matrix bias;
  Matrix ln_z;  // 1 x 1
  Matrix v;     // n x H
  std::vector<WordId> touched_rows;
  bool dense = true;

  // theta / bias expanded to full |V| rows.
  Matrix dense_theta(std::size_t vocab) const;
  Matrix dense_bias(std::size_t vocab) const;
};

struct SoftmaxOutput {
  Matrix log_probs;  // n x |V|
  std::vector<double> target_log_probs;
  double nll = 0.0;  // mean of -target_log_probs
};

// Exact softmax over the whole vocabulary for every row of v (n x H).
// Throws std::out_of_range on a target id >= |V|.
SoftmaxOutput softmax_log_probs(const HeadParams& head, const Matrix& v,
                                std::span<const WordId> targets);

// Gradient of the mean cross-entropy. The second form reuses a forward pass.
HeadGrads softmax_backward(const HeadParams& head, const Matrix& v,
                           std::span<const WordId> targets);
HeadGrads softmax_backward(const HeadParams& head, const Matrix& v,
                           std::span<const WordId> targets, const SoftmaxOutput& forward);

struct NcePosteriors {
  double data = 0.0;   // P(D=1 | w)
  double noise = 0.0;  // P(D=0 | w)
};

// p_model / (p_model + k p_noise) and its complement.
// Throws on p_noise <= 0, p_model < 0 or k == 0.
NcePosteriors nce_posteriors(double p_model, std::size_t k, double p_noise);

// Targets plus contrastive noise for one batch of n positions.
struct NceBatchSample {
  std::vector<WordId> targets;
  std::vector<double> target_noise_probs;
  NoiseDraw noise;

  std::size_t positions() const { return targets.size(); }
  void validate(std::size_t vocab) const;
};

NceBatchSample make_nce_sample(std::span<const WordId> targets, const NoiseDistribution& dist,
                               NoiseDraw noise);

// Mean over positions of
//   -[ln P(D=1 | target) + sum_j ln P(D=0 | noise_j)]
// with the unnormalised model p(w) = exp(score_w - ln Z). Posteriors are
// formed in the log domain from {score - ln Z, ln k + ln P_n}.
double nce_loss(const HeadParams& head, const Matrix& v, const NceBatchSample& sample,
                ZMode zmode);

// Gradient of nce_loss. Only target and noise rows of theta/bias are touched;
// ln_z gets a gradient only in ZMode::kLearned.
HeadGrads nce_backward(const HeadParams& head, const Matrix& v, const NceBatchSample& sample,
                       ZMode zmode);

struct NceOutput {
  double loss = 0.0;
  HeadGrads grads;
};

// Loss and gradient in one pass (the training path).
NceOutput nce_loss_and_grad(const HeadParams& head, const Matrix& v,
                            const NceBatchSample& sample, ZMode zmode, bool want_grads = true);

}  // namespace ncelm

#endif  // NCELM_HEADS_HPP
