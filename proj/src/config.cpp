#include "ncelm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace ncelm {
namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("config: " + key + ": cannot parse '" + s + "' as a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config: " + key + ": expected true/false, got '" + s + "'");
}

struct KeySpec {
  std::string section;
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Enum>
struct EnumNames {
  std::vector<std::pair<Enum, std::string>> items;

  std::string name(Enum e) const {
    for (auto& [k, v] : items)
      if (k == e) return v;
    return "?";
  }
  Enum value(const std::string& key, const std::string& s) const {
    for (auto& [k, v] : items)
      if (v == s) return k;
    std::string options;
    for (auto& [k, v] : items) options += (options.empty() ? "" : "|") + v;
    throw ConfigError("config: " + key + ": expected " + options + ", got '" + s + "'");
  }
};

const EnumNames<HeadKind> kHeadNames{{{HeadKind::kSoftmax, "softmax"}, {HeadKind::kNce, "nce"}}};
const EnumNames<ZMode> kZNames{{{ZMode::kConstant, "constant"}, {ZMode::kLearned, "learned"}}};
const EnumNames<NoiseKind> kNoiseNames{
    {{NoiseKind::kUniform, "uniform"}, {NoiseKind::kUnigram, "unigram"}, {NoiseKind::kZipf, "zipf"}}};
const EnumNames<NoiseSharing> kSharingNames{
    {{NoiseSharing::kPerBatch, "batch"}, {NoiseSharing::kPerPosition, "position"}}};
const EnumNames<InitChoice> kInitNames{{{InitChoice::kGlorot, "glorot"},
                                        {InitChoice::kGlorotQuarter, "glorot_quarter"},
                                        {InitChoice::kTuned, "tuned"},
                                        {InitChoice::kUniform, "uniform"},
                                        {InitChoice::kGaussian, "gaussian"}}};
const EnumNames<Preset> kPresetNames{{{Preset::kCustom, "custom"},
                                      {Preset::kTiny, "tiny"},
                                      {Preset::kSmall, "S"},
                                      {Preset::kMedium, "M"},
                                      {Preset::kLarge, "L"}}};

#define NCELM_SIZE_KEY(sec, key, field, help)                                           \
  KeySpec {                                                                             \
    sec, key, help, [](const ExperimentConfig& c) { return std::to_string(c.field); }, \
        [](ExperimentConfig& c, const std::string& s) {                                 \
          c.field = parse_number<std::size_t>(std::string(sec) + "." + key, s);         \
        }                                                                               \
  }
#define NCELM_REAL_KEY(sec, key, field, help)                                      \
  KeySpec {                                                                        \
    sec, key, help, [](const ExperimentConfig& c) { return format_double(c.field); }, \
        [](ExperimentConfig& c, const std::string& s) {                            \
          c.field = parse_number<double>(std::string(sec) + "." + key, s);         \
        }                                                                          \
  }
#define NCELM_BOOL_KEY(sec, key, field, help)                                              \
  KeySpec {                                                                                \
    sec, key, help, [](const ExperimentConfig& c) { return c.field ? "true" : "false"; }, \
        [](ExperimentConfig& c, const std::string& s) {                                    \
          c.field = parse_bool(std::string(sec) + "." + key, s);                           \
        }                                                                                  \
  }
#define NCELM_ENUM_KEY(sec, key, field, names, help)                                 \
  KeySpec {                                                                          \
    sec, key, help, [](const ExperimentConfig& c) { return names.name(c.field); },  \
        [](ExperimentConfig& c, const std::string& s) {                              \
          c.field = names.value(std::string(sec) + "." + key, s);                    \
        }                                                                            \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      NCELM_ENUM_KEY("model", "preset", preset, kPresetNames,
                     "defaults bundle: S | M | L | tiny | custom"),
      NCELM_SIZE_KEY("model", "layers", layers, "number of stacked LSTM layers"),
      NCELM_SIZE_KEY("model", "hidden", hidden, "LSTM hidden size H"),
      NCELM_SIZE_KEY("model", "embed", embed, "word embedding size (0 = hidden)"),
      NCELM_SIZE_KEY("model", "unroll", unroll, "truncated-BPTT window T"),
      NCELM_SIZE_KEY("model", "batch", batch, "mini-batch size B"),
      NCELM_SIZE_KEY("model", "vocab_max", vocab_max, "vocabulary cap including <unk>/<eos>"),
      NCELM_REAL_KEY("model", "dropout", dropout, "dropout rate on non-recurrent edges, [0,1)"),
      NCELM_ENUM_KEY("head", "kind", head, kHeadNames, "output layer: softmax | nce"),
      NCELM_ENUM_KEY("head", "zmode", zmode, kZNames,
                     "NCE normaliser: constant (Z=1) | learned (global ln Z)"),
      NCELM_ENUM_KEY("noise", "kind", noise.dist.kind, kNoiseNames,
                     "noise distribution: uniform | unigram | zipf"),
      NCELM_REAL_KEY("noise", "alpha", noise.dist.alpha, "unigram exponent (>= 0)"),
      NCELM_REAL_KEY("noise", "s", noise.dist.s, "zipf exponent over frequency ranks (> 0)"),
      NCELM_SIZE_KEY("noise", "k", noise.k, "noise samples per batch or per position"),
      NCELM_ENUM_KEY("noise", "sharing", noise.sharing, kSharingNames,
                     "batch (k ids shared per mini-batch) | position"),
      NCELM_BOOL_KEY("noise", "unique", noise.unique, "draw k distinct ids"),
      NCELM_ENUM_KEY("init", "kind", init, kInitNames,
                     "glorot | glorot_quarter | tuned (S/M/L only) | uniform | gaussian"),
      NCELM_REAL_KEY("init", "lo", init_lo, "lower bound for init.kind = uniform"),
      NCELM_REAL_KEY("init", "hi", init_hi, "upper bound for init.kind = uniform"),
      NCELM_REAL_KEY("init", "sigma", init_sigma, "std-dev for init.kind = gaussian"),
      NCELM_REAL_KEY("schedule", "eta0", schedule.eta0, "initial learning rate"),
      NCELM_REAL_KEY("schedule", "psi", schedule.psi, "decay factor after the search period (> 1)"),
      NCELM_SIZE_KEY("schedule", "tau", schedule.tau, "search-period length in epochs"),
      NCELM_REAL_KEY("clip", "max_norm", clip.max_norm, "global gradient-norm threshold"),
      NCELM_SIZE_KEY("clip", "batch_divisor", clip.batch_divisor,
                     "divide gradients by this before clipping (1 for mean losses)"),
      NCELM_SIZE_KEY("train", "epochs", epochs, "training epochs"),
      KeySpec{"train", "seed", "experiment seed",
              [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, const std::string& s) {
                c.seed = parse_number<std::uint64_t>("train.seed", s);
              }},
      NCELM_BOOL_KEY("train", "early_stop", early_stop,
                     "report the test perplexity of the best-validation epoch"),
      NCELM_REAL_KEY("train", "train_ppl_fraction", train_ppl_fraction,
                     "fraction of train used for the per-epoch softmax perplexity proxy"),
      KeySpec{"embeddings", "path", "word2vec text file (empty = learn from scratch)",
              [](const ExperimentConfig& c) { return c.embeddings_path; },
              [](ExperimentConfig& c, const std::string& s) { c.embeddings_path = s; }},
      NCELM_BOOL_KEY("embeddings", "fine_tune", fine_tune, "update loaded embeddings"),
      NCELM_BOOL_KEY("embeddings", "lowercase", lowercase,
                     "lower-case embedding-file words before matching"),
  };
  return specs;
}

}  // namespace

Preset parse_preset(const std::string& name) { return kPresetNames.value("model.preset", name); }
std::string preset_name(Preset preset) { return kPresetNames.name(preset); }

ExperimentConfig ExperimentConfig::from_preset(Preset preset) {
  ExperimentConfig c;
  c.preset = preset;
  c.batch = 20;
  c.layers = 2;
  c.head = HeadKind::kNce;
  c.noise.k = 600;
  c.noise.dist = NoiseSpec{NoiseKind::kZipf, 1.0, 1.0};
  c.schedule.eta0 = 1.0;
  switch (preset) {
    case Preset::kCustom:
      c.init = InitChoice::kGlorot;
      break;
    case Preset::kSmall:
      c.hidden = 200;
      c.unroll = 20;
      c.dropout = 0.0;
      c.schedule.tau = 7;
      c.schedule.psi = 2.0;
      c.epochs = 20;
      c.clip.max_norm = 5.0;
      c.init = InitChoice::kTuned;
      break;
    case Preset::kMedium:
      c.hidden = 650;
      c.unroll = 35;
      c.dropout = 0.5;
      c.schedule.tau = 25;
      c.schedule.psi = 1.2;
      c.epochs = 39;
      c.clip.max_norm = 5.0;
      c.init = InitChoice::kTuned;
      break;
    case Preset::kLarge:
      c.hidden = 1500;
      c.unroll = 35;
      c.dropout = 0.6;
      c.schedule.tau = 12;
      c.schedule.psi = 1.15;
      c.epochs = 55;
      c.clip.max_norm = 10.0;
      c.init = InitChoice::kTuned;
      break;
    case Preset::kTiny:
      c.hidden = 64;
      c.unroll = 20;
      c.vocab_max = 2000;
      c.dropout = 0.0;
      c.schedule.eta0 = 20.0;
      c.schedule.tau = 8;
      c.schedule.psi = 2.0;
      c.epochs = 13;
      c.clip.max_norm = 0.25;
      c.noise.k = 50;
      c.init = InitChoice::kUniform;
      c.init_lo = -0.1;
      c.init_hi = 0.1;
      break;
  }
  return c;
}

ModelSize ExperimentConfig::model_size() const {
  switch (preset) {
    case Preset::kSmall: return ModelSize::kSmall;
    case Preset::kMedium: return ModelSize::kMedium;
    case Preset::kLarge: return ModelSize::kLarge;
    default:
      throw ConfigError("config: init.kind = tuned needs model.preset S, M or L");
  }
}

InitHeuristic ExperimentConfig::init_heuristic() const {
  switch (init) {
    case InitChoice::kGlorot: return InitHeuristic::glorot();
    case InitChoice::kGlorotQuarter: return InitHeuristic::glorot_quarter();
    case InitChoice::kTuned: return InitHeuristic::tuned(model_size());
    case InitChoice::kUniform: return InitHeuristic::uniform(init_lo, init_hi);
    case InitChoice::kGaussian: return InitHeuristic::gaussian(init_sigma);
  }
  throw ConfigError("config: unknown init kind");
}

std::vector<std::string> ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  need(layers >= 1, "model.layers must be >= 1");
  need(hidden >= 1, "model.hidden must be >= 1");
  need(unroll >= 1, "model.unroll must be >= 1");
  need(batch >= 1, "model.batch must be >= 1");
  need(vocab_max >= 2, "model.vocab_max must be >= 2");
  need(dropout >= 0.0 && dropout < 1.0, "model.dropout must lie in [0, 1)");
  need(epochs >= 1, "train.epochs must be >= 1");
  need(train_ppl_fraction > 0.0 && train_ppl_fraction <= 1.0,
       "train.train_ppl_fraction must lie in (0, 1]");
  try {
    noise.validate();
    schedule.validate(epochs);
    clip.validate();
    init_heuristic().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::vector<std::string> warnings;
  if (head == HeadKind::kNce) {
    if (auto w = tau_warning(schedule, epochs)) warnings.push_back(*w);
  }
  return warnings;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& k : key_specs()) {
    if (k.section != section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.name << " = " << k.get(*this) << '\n';
  }
  return os.str();
}

ExperimentConfig parse_config_text(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  const auto& specs = key_specs();
  Preset preset = Preset::kCustom;
  if (auto model = tree.get_child_optional("model")) {
    if (auto p = model->get_optional<std::string>("preset")) preset = parse_preset(*p);
  }
  ExperimentConfig cfg = ExperimentConfig::from_preset(preset);

  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw ConfigError("config: key '" + section + "' must appear inside a section");
    const bool known_section = std::any_of(specs.begin(), specs.end(),
                                           [&](const KeySpec& k) { return k.section == section; });
    if (!known_section) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [name, value] : keys) {
      auto it = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& k) {
        return k.section == section && k.name == name;
      });
      if (it == specs.end()) throw ConfigError("config: unknown key " + section + "." + name);
      it->set(cfg, value.data());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void set_config_key(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto& specs = key_specs();
  auto it = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& k) {
    return k.section + "." + k.name == dotted_key;
  });
  if (it == specs.end()) throw ConfigError("config: unknown key " + dotted_key);
  it->set(cfg, value);
}

std::string config_reference() {
  std::ostringstream os;
  for (const auto& k : key_specs()) {
    std::string key = k.section + "." + k.name;
    os << "  " << key << std::string(key.size() < 26 ? 26 - key.size() : 1, ' ') << k.help
       << '\n';
  }
  return os.str();
}

}  // namespace ncelm
