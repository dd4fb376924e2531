#include "ncelm/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace ncelm {

void NoiseSpec::validate() const {
  if (kind == NoiseKind::kUnigram && !(alpha >= 0.0 && std::isfinite(alpha)))
    throw std::invalid_argument("noise: unigram alpha must be >= 0, got " + std::to_string(alpha));
  if (kind == NoiseKind::kZipf && !(s > 0.0 && std::isfinite(s)))
    throw std::invalid_argument("noise: zipf exponent must be > 0, got " + std::to_string(s));
}

std::string NoiseSpec::describe() const {
  switch (kind) {
    case NoiseKind::kUniform: return "uniform";
    case NoiseKind::kUnigram: return "unigram(alpha=" + std::to_string(alpha) + ")";
    case NoiseKind::kZipf: return "zipf(s=" + std::to_string(s) + ")";
  }
  return "?";
}

void NoiseConfig::validate() const {
  dist.validate();
  if (k < 1) throw std::invalid_argument("noise: k must be >= 1");
}

AliasTable alias_build(std::span<const double> probs) {
  const std::size_t n = probs.size();
  if (n == 0) throw std::invalid_argument("alias_build: empty distribution");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(probs[i] > 0.0) || !std::isfinite(probs[i]))
      throw std::invalid_argument("alias_build: probability " + std::to_string(i) +
                                  " is not positive");
    total += probs[i];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("alias_build: probabilities sum to " + std::to_string(total));

  AliasTable t;
  t.prob.assign(n, 0.0);
  t.alias.resize(n);
  std::iota(t.alias.begin(), t.alias.end(), 0u);

  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probs[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    t.prob[s] = scaled[s];
    t.alias[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (auto i : large) t.prob[i] = 1.0;
  for (auto i : small) t.prob[i] = 1.0;
  return t;
}

NoiseDistribution::NoiseDistribution(std::vector<double> probs, NoiseSpec spec)
    : probs_(std::move(probs)), table_(alias_build(probs_)), spec_(spec) {}

WordId NoiseDistribution::draw(RngStream& rng) const {
  const auto cell = static_cast<WordId>(rng.below(probs_.size()));
  return rng.uniform01() < table_.prob[cell] ? cell : table_.alias[cell];
}

NoiseDistribution build_noise_from_counts(std::span<const std::uint64_t> counts,
                                          const NoiseSpec& spec) {
  spec.validate();
  const std::size_t n = counts.size();
  if (n == 0) throw std::invalid_argument("build_noise: empty vocabulary");
  std::vector<double> weights(n);
  switch (spec.kind) {
    case NoiseKind::kUniform:
      std::fill(weights.begin(), weights.end(), 1.0);
      break;
    case NoiseKind::kUnigram:
      for (std::size_t i = 0; i < n; ++i) {
        const double c = static_cast<double>(std::max<std::uint64_t>(counts[i], 1));
        weights[i] = std::pow(c, spec.alpha);
      }
      break;
    case NoiseKind::kZipf: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
      for (std::size_t r = 0; r < n; ++r)
        weights[order[r]] = std::pow(static_cast<double>(r + 1), -spec.s);
      break;
    }
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return NoiseDistribution(std::move(weights), spec);
}

NoiseDistribution build_noise(const Vocabulary& vocab, const NoiseSpec& spec) {
  return build_noise_from_counts(vocab.counts(), spec);
}

NoiseDraw sample_noise(const NoiseDistribution& dist, const NoiseConfig& cfg,
                       std::size_t positions, RngStream& rng) {
  cfg.validate();
  if (cfg.unique && cfg.k > dist.size())
    throw std::invalid_argument("sample_noise: unique mode needs k <= |V| (k=" +
                                std::to_string(cfg.k) + ", |V|=" + std::to_string(dist.size()) +
                                ")");
  NoiseDraw out;
  out.k = cfg.k;
  out.sharing = cfg.sharing;
  const std::size_t sets = cfg.sharing == NoiseSharing::kPerBatch ? 1 : positions;
  out.ids.reserve(sets * cfg.k);
  std::unordered_set<WordId> seen;
  for (std::size_t s = 0; s < sets; ++s) {
    seen.clear();
    for (std::size_t j = 0; j < cfg.k; ++j) {
      WordId id = dist.draw(rng);
      if (cfg.unique) {
        while (!seen.insert(id).second) id = dist.draw(rng);
      }
      out.ids.push_back(id);
    }
  }
  out.probs.reserve(out.ids.size());
  for (WordId id : out.ids) out.probs.push_back(dist.prob(id));
  return out;
}

}  // namespace ncelm
