#include "ncelm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ncelm {

void ScheduleConfig::validate(std::size_t epochs) const {
  if (!(eta0 > 0.0)) throw std::invalid_argument("schedule: eta0 must be > 0");
  if (!(psi > 1.0)) throw std::invalid_argument("schedule: psi must be > 1");
  if (tau < 1 || tau > epochs)
    throw std::invalid_argument("schedule: tau must lie in [1, epochs=" + std::to_string(epochs) +
                                "], got " + std::to_string(tau));
}

double learning_rate(std::size_t epoch, const ScheduleConfig& cfg) {
  const double t = static_cast<double>(epoch);
  const double exponent = std::max(t + 1.0 - static_cast<double>(cfg.tau), 0.0);
  return cfg.eta0 * std::pow(1.0 / cfg.psi, exponent);
}

std::optional<std::string> tau_warning(const ScheduleConfig& cfg, std::size_t epochs) {
  const auto limit = static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(epochs) / 3.0));
  if (cfg.tau <= limit) return std::nullopt;
  return "tau=" + std::to_string(cfg.tau) + " exceeds two thirds of " + std::to_string(epochs) +
         " epochs (" + std::to_string(limit) + "); NCE training tends to suffer";
}

double glorot_range(std::size_t n_in, std::size_t n_out, bool quarter) {
  const double r = std::sqrt(6.0) / std::sqrt(static_cast<double>(n_in + n_out));
  return quarter ? r / 4.0 : r;
}

double tuned_init_range(ModelSize size) {
  switch (size) {
    case ModelSize::kSmall: return 0.0153;
    case ModelSize::kMedium: return 0.00849;
    case ModelSize::kLarge: return 0.00625;
  }
  return 0.0;
}

void InitHeuristic::validate() const {
  if (kind == InitKind::kExplicit && !(lo < hi))
    throw std::invalid_argument("init: explicit range needs lo < hi");
  if (kind == InitKind::kGaussian && !(sigma > 0.0))
    throw std::invalid_argument("init: gaussian sigma must be > 0");
}

InitHeuristic InitHeuristic::resolved(std::size_t hidden) const {
  validate();
  switch (kind) {
    case InitKind::kGlorot: return symmetric(glorot_range(hidden, hidden, false));
    case InitKind::kGlorotQuarter: return symmetric(glorot_range(hidden, hidden, true));
    default: return *this;
  }
}

double InitHeuristic::draw(RngStream& rng) const {
  switch (kind) {
    case InitKind::kExplicit: return rng.uniform(lo, hi);
    case InitKind::kGaussian: return sigma * rng.gaussian();
    default: throw std::logic_error("InitHeuristic::draw on an unresolved Glorot heuristic");
  }
}

std::string InitHeuristic::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind) {
    case InitKind::kGlorot: os << "glorot"; break;
    case InitKind::kGlorotQuarter: os << "glorot_quarter"; break;
    case InitKind::kExplicit: os << "U(" << lo << ", " << hi << ")"; break;
    case InitKind::kGaussian: os << "N(0, " << sigma << "^2)"; break;
  }
  return os.str();
}

void init_params(ModelParams& params, const InitHeuristic& heuristic, RngStream& rng) {
  const InitHeuristic init = heuristic.resolved(params.head.hidden_size());
  auto fill = [&](Matrix& m) {
    for (double& x : m.values()) x = init.draw(rng);
  };
  fill(params.embedding);
  for (auto& layer : params.layers) {
    fill(layer.w_x);
    fill(layer.w_h);
    layer.b.fill(0.0);
  }
  fill(params.head.theta);
  params.head.bias.fill(0.0);
  params.head.ln_z.fill(0.0);
}

void ClipConfig::validate() const {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip: max_norm must be > 0");
  if (batch_divisor == 0) throw std::invalid_argument("clip: batch_divisor must be >= 1");
}

ClipReport clip_by_global_norm(Gradients& grads, const ClipConfig& cfg) {
  cfg.validate();
  const double inv_div = 1.0 / static_cast<double>(cfg.batch_divisor);
  double sq = 0.0;
  std::string bad;
  grads.for_each([&](const std::string& name, std::span<double> v) {
    for (double& x : v) {
      if (!std::isfinite(x) && bad.empty()) bad = name;
      x *= inv_div;
      sq += x * x;
    }
  });
  if (!bad.empty())
    throw std::runtime_error("clip_by_global_norm: non-finite gradient in " + bad +
                             " (training diverged)");
  ClipReport r;
  r.norm_before = std::sqrt(sq);
  r.norm_after = r.norm_before;
  if (r.norm_before > cfg.max_norm) {
    r.scale = cfg.max_norm / r.norm_before;
    grads.for_each([&](const std::string&, std::span<double> v) {
      for (double& x : v) x *= r.scale;
    });
    r.norm_after = cfg.max_norm;
  }
  return r;
}

namespace {

void axpy(std::span<double> y, std::span<const double> x, double a) {
  if (y.size() != x.size()) throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= a * x[i];
}

void apply_rows(Matrix& table, const RowGrad& g, double eta, const char* name) {
  if (g.values.empty()) return;
  if (g.values.cols() != table.cols())
    throw std::invalid_argument(std::string("sgd_step: width mismatch for ") + name);
  if (g.dense) {
    axpy(table.values(), g.values.values(), eta);
    return;
  }
  for (std::size_t i = 0; i < g.rows.size(); ++i) axpy(table.row(g.rows[i]), g.values.row(i), eta);
}

}  // namespace

void sgd_step(ModelParams& params, const Gradients& grads, double eta) {
  if (grads.layers.size() != params.layers.size())
    throw std::invalid_argument("sgd_step: layer count mismatch");
  if (grads.train_embedding) apply_rows(params.embedding, grads.embedding, eta, "embedding");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    axpy(params.layers[l].w_x.values(), grads.layers[l].w_x.values(), eta);
    axpy(params.layers[l].w_h.values(), grads.layers[l].w_h.values(), eta);
    axpy(params.layers[l].b.values(), grads.layers[l].b.values(), eta);
  }
  apply_rows(params.head.theta, grads.theta, eta, "head.theta");
  if (!grads.bias.values.empty()) {
    if (grads.bias.dense) {
      axpy(params.head.bias.values(), grads.bias.values.values(), eta);
    } else {
      for (std::size_t i = 0; i < grads.bias.rows.size(); ++i)
        params.head.bias(0, grads.bias.rows[i]) -= eta * grads.bias.values(i, 0);
    }
  }
  params.head.ln_z(0, 0) -= eta * grads.ln_z(0, 0);
}

}  // namespace ncelm
