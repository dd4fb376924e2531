#ifndef NCELM_ORACLE_HPP
#define NCELM_ORACLE_HPP

// Verification machinery kept apart from the training path: central finite
// differences and the context-free NCE consistency experiment.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ncelm/noise.hpp"
#include "ncelm/rng.hpp"
#include "ncelm/tensor.hpp"

namespace ncelm::oracle {

inline constexpr double kDefaultStep = 1e-5;
inline constexpr double kRelativeFloor = 1e-8;

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every i.
// Throws std::runtime_error when two evaluations at x differ.
std::vector<double> finite_diff_grad(const ScalarFn& loss, std::span<const double> x,
                                     double h = kDefaultStep);

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // values at worst_index
  double numeric = 0.0;
};

struct GradCheckReport {
  std::string component;
  double h = kDefaultStep;
  std::vector<TensorCheck> tensors;

  double max_rel_err() const;
  bool passed(double tolerance) const { return max_rel_err() < tolerance; }
};

// A tensor perturbed in place plus the analytic gradient to compare with.
struct GradCheckEntry {
  std::string name;
  Matrix* values;
  Matrix analytic;
};

// Checks every entry against finite differences of `loss`, which must read
// the tensors through the pointers in `entries`.
GradCheckReport check_gradients(const std::string& component, std::vector<GradCheckEntry> entries,
                                const std::function<double()>& loss, double h = kDefaultStep);

// Desk-scale suite: LSTM cell, 2-layer stack (H=8, T=4, B=2), softmax head
// (|V|=12), NCE head (k=4; constant and learned Z; shared and per-position
// noise), and a full model including embedding rows.
std::vector<GradCheckReport> run_gradcheck_suite(std::uint64_t seed);

// "tensor,max_rel_err,coord,h" rows with component-qualified tensor names.
std::string reports_csv(const std::vector<GradCheckReport>& reports);
std::string reports_text(const std::vector<GradCheckReport>& reports, double tolerance);

// --- Consistency of NCE with maximum likelihood (context-free model) -------
//
// The model has one free logit u_w per word and Z = 1, so p_model(w) =
// exp(u_w). With data distribution q (normalised counts) the expected
// objective, noise term summed exactly over the vocabulary, is
//   J(u) = sum_w q_w ln s_w + k sum_w Pn_w ln(1 - s_w),
//   s_w  = sigmoid(u_w - ln(k Pn_w)).

double kl_divergence(std::span<const double> p, std::span<const double> q);

double nce_expected_objective(std::span<const double> logits, std::span<const double> data,
                              std::span<const double> noise, std::size_t k);

// dJ/du_w = q_w (1 - s_w) - k Pn_w s_w
std::vector<double> nce_expected_gradient(std::span<const double> logits,
                                          std::span<const double> data,
                                          std::span<const double> noise, std::size_t k);

struct ConsistencyFit {
  std::size_t k = 0;
  std::vector<double> logits;
  std::vector<double> distribution;  // softmax of the fitted logits
  double kl_to_mle = 0.0;            // KL(fitted || normalised counts)
  double grad_norm = 0.0;            // at the last iterate
  double self_normalisation = 0.0;   // sum_w exp(u_w)
  bool converged = false;            // grad_norm <= grad_tol
  std::size_t steps = 0;
};

// Gradient ascent on J from u = 0 for `steps` iterations of size `eta`.
// |V| must be at most 64 and every count positive.
ConsistencyFit nce_consistency_fit(std::span<const double> counts, const NoiseDistribution& noise,
                                   std::size_t k, std::size_t steps, double eta,
                                   double grad_tol = 1e-6);

struct GradientBiasReport {
  std::size_t resamples = 0;
  std::vector<double> exact;         // d(mean NCE loss)/du, exact expectation over noise
  std::vector<double> mean_sampled;  // mean of nce_backward over resamples
  double max_abs_dev = 0.0;
  double rms_dev = 0.0;
};

// The data term uses one position per unit of count; each resample draws
// fresh per-position noise and runs the head's nce_backward on the
// context-free model (H = 1, v = 1, theta_w = u_w).
GradientBiasReport sampled_vs_exact_nce(std::span<const double> counts,
                                        std::span<const double> logits,
                                        const NoiseDistribution& noise, std::size_t k,
                                        std::size_t num_resamples, RngStream& rng);

}  // namespace ncelm::oracle

#endif  // NCELM_ORACLE_HPP
