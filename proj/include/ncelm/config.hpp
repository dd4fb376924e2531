#ifndef NCELM_CONFIG_HPP
#define NCELM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncelm/heads.hpp"
#include "ncelm/lstm.hpp"
#include "ncelm/noise.hpp"
#include "ncelm/optim.hpp"

namespace ncelm {

// Raised for invalid configuration or command lines (CLI exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HeadKind { kSoftmax, kNce };

enum class Preset { kCustom, kTiny, kSmall, kMedium, kLarge };

enum class InitChoice { kGlorot, kGlorotQuarter, kTuned, kUniform, kGaussian };

struct ExperimentConfig {
  Preset preset = Preset::kCustom;

  // [model]
  std::size_t layers = 2;
  std::size_t hidden = 200;
  std::size_t embed = 0;  // 0 = same as hidden
  std::size_t unroll = 20;
  std::size_t batch = 20;
  std::size_t vocab_max = 10000;
  double dropout = 0.0;

  // [head]
  HeadKind head = HeadKind::kNce;
  ZMode zmode = ZMode::kConstant;

  // [noise]
  NoiseConfig noise;

  // [init]
  InitChoice init = InitChoice::kTuned;
  double init_lo = -0.05;
  double init_hi = 0.05;
  double init_sigma = 0.05;

  // [schedule]
  ScheduleConfig schedule;

  // [clip]
  ClipConfig clip;

  // [train]
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  bool early_stop = true;
  double train_ppl_fraction = 0.05;

  // [embeddings]
  std::string embeddings_path;  // empty = learn from scratch
  bool fine_tune = true;
  bool lowercase = false;

  static ExperimentConfig from_preset(Preset preset);

  std::size_t embed_dim() const { return embed == 0 ? hidden : embed; }
  ModelSize model_size() const;  // throws ConfigError for non S/M/L presets
  InitHeuristic init_heuristic() const;
  DropoutSpec dropout_spec() const { return {dropout}; }

  // Throws ConfigError on invalid values; returns warnings.
  std::vector<std::string> validate() const;

  // Fully resolved config in the config-file grammar (parse(to_text()) is
  // the identity).
  std::string to_text() const;
};

// Config file grammar: INI sections with "key = value" lines, '#' or ';'
// comments. An optional "preset" key in [model] (S, M, L, tiny, custom)
// supplies defaults; every other key overrides it. Unknown sections or keys
// are rejected with ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one key given as "section.key"; throws ConfigError for unknown keys
// or unparsable values. Setting model.preset only records the name.
void set_config_key(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value);

// One line per key: "section.key  description".
std::string config_reference();

Preset parse_preset(const std::string& name);
std::string preset_name(Preset preset);

}  // namespace ncelm

#endif  // NCELM_CONFIG_HPP
