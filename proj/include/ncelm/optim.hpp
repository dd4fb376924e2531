#ifndef NCELM_OPTIM_HPP
#define NCELM_OPTIM_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ncelm/model.hpp"
#include "ncelm/rng.hpp"

namespace ncelm {

// Search-then-converge schedule: eta0 for the first `tau` epochs, then a
// geometric decay by 1/psi per epoch.
struct ScheduleConfig {
  double eta0 = 1.0;
  double psi = 2.0;
  std::size_t tau = 7;

  // Throws std::invalid_argument unless eta0 > 0, psi > 1, 1 <= tau <= epochs.
  void validate(std::size_t epochs) const;
};

// eta0 * (1/psi)^max(t + 1 - tau, 0) for the 0-indexed epoch t.
double learning_rate(std::size_t epoch, const ScheduleConfig& cfg);

// Warning text when an NCE run searches longer than two thirds of training;
// empty otherwise.
std::optional<std::string> tau_warning(const ScheduleConfig& cfg, std::size_t epochs);

enum class ModelSize { kSmall, kMedium, kLarge };

// Glorot half-width sqrt(6) / sqrt(n_in + n_out), divided by 4 for `quarter`.
double glorot_range(std::size_t n_in, std::size_t n_out, bool quarter);

// Hand-tuned uniform half-widths for the S / M / L presets.
double tuned_init_range(ModelSize size);

enum class InitKind { kGlorot, kGlorotQuarter, kExplicit, kGaussian };

// One distribution shared by every weight matrix; biases start at zero.
// The Glorot kinds resolve to U(-r, r) with r = glorot_range(H, H).
struct InitHeuristic {
  InitKind kind = InitKind::kGlorot;
  double lo = 0.0;
  double hi = 0.0;
  double sigma = 0.0;

  static InitHeuristic glorot() { return {InitKind::kGlorot}; }
  static InitHeuristic glorot_quarter() { return {InitKind::kGlorotQuarter}; }
  static InitHeuristic uniform(double lo, double hi) { return {InitKind::kExplicit, lo, hi}; }
  static InitHeuristic symmetric(double half_width) { return uniform(-half_width, half_width); }
  static InitHeuristic gaussian(double sigma) { return {InitKind::kGaussian, 0.0, 0.0, sigma}; }
  static InitHeuristic tuned(ModelSize size) { return symmetric(tuned_init_range(size)); }

  void validate() const;
  // Explicit or gaussian form for a model with the given hidden size.
  InitHeuristic resolved(std::size_t hidden) const;
  // Draw from a resolved heuristic.
  double draw(RngStream& rng) const;
  std::string describe() const;
};

// Fills every weight of `params` from `heuristic` (resolved against the
// hidden size) and zeroes biases and ln Z.
void init_params(ModelParams& params, const InitHeuristic& heuristic, RngStream& rng);

struct ClipConfig {
  double max_norm = 5.0;
  // Divides gradients before clipping. 1 when the loss is already a mean.
  std::size_t batch_divisor = 1;

  void validate() const;
};

struct ClipReport {
  double norm_before = 0.0;
  double norm_after = 0.0;
  double scale = 1.0;
};

// Divides by batch_divisor, then rescales so the global L2 norm is at most
// max_norm. Throws std::runtime_error if any gradient is NaN or infinite.
ClipReport clip_by_global_norm(Gradients& grads, const ClipConfig& cfg);

// params -= eta * grads, touching only the rows marked in sparse gradients.
void sgd_step(ModelParams& params, const Gradients& grads, double eta);

}  // namespace ncelm

#endif  // NCELM_OPTIM_HPP
