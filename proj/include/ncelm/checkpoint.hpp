#ifndef NCELM_CHECKPOINT_HPP
#define NCELM_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ncelm/config.hpp"
#include "ncelm/corpus.hpp"
#include "ncelm/model.hpp"

namespace ncelm {

inline constexpr char kCheckpointMagic[] = "NCELM1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  Vocabulary vocab;
  ModelParams params;
  std::vector<std::pair<std::string, std::string>> rng_states;  // role -> state text
  double best_valid_ppl = 0.0;
  std::uint64_t epoch = 0;
};

// Layout (all integers unsigned little-endian, reals IEEE-754 binary64 LE,
// "str" = u64 byte length followed by the bytes):
//   magic "NCELM1" (6 bytes), u32 version,
//   u64 epoch, f64 best_valid_ppl, str config_text,
//   u64 |V|, |V| x (str word, u64 count),
//   u64 n_rng, n_rng x (str role, str state),
//   u64 n_tensors, n_tensors x (str name, u64 rows, u64 cols, rows*cols f64).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws std::runtime_error on a bad magic, version, or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ncelm

#endif  // NCELM_CHECKPOINT_HPP
