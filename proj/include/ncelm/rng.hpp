#ifndef NCELM_RNG_HPP
#define NCELM_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ncelm {

// Sub-task streams derived from one experiment seed.
enum class StreamRole : std::uint64_t {
  kInit = 0x696e6974ULL,     // "init"
  kDropout = 0x64726f70ULL,  // "drop"
  kNoise = 0x6e6f6973ULL,    // "nois"
  kData = 0x64617461ULL,     // "data"
};

const char* role_name(StreamRole role);

// Deterministic random stream.
//
// Engine: std::mt19937_64, whose recurrence and output are fixed by the C++
// standard, so the raw 64-bit words are identical on every conforming
// implementation. The seed passed to the engine is splitmix64(seed), and a
// role stream uses splitmix64(seed + role_tag). All real-valued draws are
// computed here from raw words rather than via <random> distributions
// (whose algorithms are implementation-defined):
//   uniform01  = (word >> 11) * 2^-53                  in [0, 1)
//   below(n)   = rejection on word against 2^64 - (2^64 mod n)
//   gaussian   = Box-Muller on two uniform01 draws, both outputs used.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  static RngStream for_role(std::uint64_t seed, StreamRole role);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  // Value in [lo, hi). Throws std::invalid_argument when lo >= hi.
  double uniform(double lo, double hi);
  // Integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double gaussian();

  // Full engine state as text, for checkpoints.
  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const RngStream& other) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// n draws from U[lo, hi) on `stream`.
std::vector<double> rng_uniform(RngStream& stream, double lo, double hi, std::size_t n);

}  // namespace ncelm

#endif  // NCELM_RNG_HPP
