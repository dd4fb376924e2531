#ifndef NCELM_NOISE_HPP
#define NCELM_NOISE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/rng.hpp"

namespace ncelm {

enum class NoiseKind { kUniform, kUnigram, kZipf };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kZipf;
  double alpha = 1.0;  // unigram exponent, >= 0
  double s = 1.0;      // zipf exponent, > 0

  void validate() const;
  std::string describe() const;
};

enum class NoiseSharing { kPerBatch, kPerPosition };

// The noise sample counts tried for the published runs; 600 is the default.
inline constexpr std::size_t kNoiseSampleOptions[] = {50, 100, 150, 300, 600, 1200};

struct NoiseConfig {
  NoiseSpec dist;
  std::size_t k = 600;
  NoiseSharing sharing = NoiseSharing::kPerBatch;
  bool unique = false;

  void validate() const;
};

// Vose alias tables: cell c keeps itself with probability prob[c] and
// otherwise yields alias[c].
struct AliasTable {
  std::vector<double> prob;
  std::vector<std::uint32_t> alias;
};

// Throws std::invalid_argument unless probs is non-empty, every entry is
// positive and finite, and the sum is within 1e-9 of one.
AliasTable alias_build(std::span<const double> probs);

class NoiseDistribution {
 public:
  NoiseDistribution(std::vector<double> probs, NoiseSpec spec);

  std::size_t size() const { return probs_.size(); }
  double prob(WordId id) const { return probs_[id]; }
  std::span<const double> probs() const { return probs_; }
  const AliasTable& table() const { return table_; }
  const NoiseSpec& spec() const { return spec_; }

  // One O(1) alias draw: a uniform cell, then a biased coin.
  WordId draw(RngStream& rng) const;

 private:
  std::vector<double> probs_;
  AliasTable table_;
  NoiseSpec spec_;
};

// counts must be indexed by id. Zipf ranks are 1-based by descending count
// (ties by id); zero counts are floored to 1 for the unigram kind.
NoiseDistribution build_noise_from_counts(std::span<const std::uint64_t> counts,
                                          const NoiseSpec& spec);
NoiseDistribution build_noise(const Vocabulary& vocab, const NoiseSpec& spec);

// Noise ids with their probabilities. Layout is k ids for kPerBatch and
// positions x k ids (row-major) for kPerPosition.
struct NoiseDraw {
  std::size_t k = 0;
  NoiseSharing sharing = NoiseSharing::kPerBatch;
  std::vector<WordId> ids;
  std::vector<double> probs;
};

// Throws std::invalid_argument in unique mode when k exceeds the vocabulary.
NoiseDraw sample_noise(const NoiseDistribution& dist, const NoiseConfig& cfg,
                       std::size_t positions, RngStream& rng);

}  // namespace ncelm

#endif  // NCELM_NOISE_HPP
