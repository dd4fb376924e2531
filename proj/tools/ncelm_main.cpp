// ncelm: train and evaluate LSTM language models with softmax or NCE heads,
// and run the verification oracles.
//
// Exit status: 0 success, 1 a check failed or training diverged, 2 bad
// command line or configuration.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ncelm/checkpoint.hpp"
#include "ncelm/config.hpp"
#include "ncelm/noise.hpp"
#include "ncelm/optim.hpp"
#include "ncelm/oracle.hpp"
#include "ncelm/trainer.hpp"

namespace {

using namespace ncelm;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct ConfigArgs {
  std::string file;
  std::string preset;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "INI config file");
    cmd->add_option("-p,--preset", preset, "preset: S | M | L | tiny | custom");
    cmd->add_option("-s,--set", sets, "override one key, e.g. --set schedule.tau=4")
        ->take_all();
  }

  ExperimentConfig resolve(Preset fallback) const {
    ExperimentConfig cfg;
    if (!file.empty()) {
      cfg = load_config(file);
      if (!preset.empty()) throw ConfigError("give either --config or --preset, not both");
    } else {
      cfg = ExperimentConfig::from_preset(preset.empty() ? fallback : parse_preset(preset));
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got " + kv);
      set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::string full(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// --- train -----------------------------------------------------------------

int cmd_train(const ConfigArgs& ca, const std::string& data, const std::string& out) {
  const ExperimentConfig cfg = ca.resolve(Preset::kTiny);
  print_warnings(cfg.validate());
  bool header = false;
  const auto report = run_experiment(cfg, data, out, [&](const EpochMetrics& m) {
    if (!std::exchange(header, true))
      std::cout << "epoch  lr          train_obj   valid_ppl   seconds\n";
    std::cout << std::setw(5) << m.epoch << "  " << std::left << std::setw(10) << full(m.lr)
              << "  " << std::setw(10) << full(m.train_obj) << "  " << std::setw(10)
              << full(m.valid_ppl) << "  " << std::right << std::fixed << std::setprecision(1)
              << m.seconds << std::defaultfloat << std::endl;
  });
  std::cout << "best epoch " << report.best_epoch << ", valid ppl " << full(report.best_valid_ppl)
            << "\ntest ppl " << full(report.reported_test_ppl)
            << (cfg.early_stop ? " (best validation epoch)" : " (last epoch)") << "\noutputs in "
            << out << '\n';
  return kOk;
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& split,
             std::size_t batch, std::size_t steps) {
  if (split != "train" && split != "valid" && split != "test")
    throw ConfigError("--split must be train, valid or test");
  if (!std::filesystem::is_regular_file(ckpt_path))
    throw ConfigError("checkpoint not found: " + ckpt_path);
  const auto path = split_path(data, split);
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("corpus split '" + split + "' not found at " + path.string());
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const TokenStream stream = encode(ck.vocab, read_text_file(path));
  const std::size_t b = batch ? batch : ck.config.batch;
  const std::size_t t = steps ? steps : ck.config.unroll;
  const double ppl = evaluate_ppl(ck.params, stream, b, t);
  std::cout << split << " ppl " << full(ppl) << " (" << stream.ids.size() << " tokens, |V| "
            << ck.vocab.size() << ", trained with "
            << (ck.config.head == HeadKind::kNce ? "nce" : "softmax") << ", epoch " << ck.epoch
            << ")\n";
  return kOk;
}

// --- grad-check --------------------------------------------------------------

int cmd_grad_check(std::uint64_t seed, double tol, const std::string& csv) {
  const auto reports = oracle::run_gradcheck_suite(seed);
  std::cout << oracle::reports_text(reports, tol);
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw ConfigError("cannot write " + csv);
    out << oracle::reports_csv(reports);
  }
  const bool ok = std::all_of(reports.begin(), reports.end(),
                              [&](const auto& r) { return r.passed(tol); });
  std::cout << (ok ? "all gradients agree" : "gradient check FAILED") << '\n';
  return ok ? kOk : kFailed;
}

// --- consistency ---------------------------------------------------------------

NoiseSpec noise_spec(const std::string& kind, double alpha, double s) {
  NoiseSpec spec;
  if (kind == "uniform") spec.kind = NoiseKind::kUniform;
  else if (kind == "unigram") spec.kind = NoiseKind::kUnigram;
  else if (kind == "zipf") spec.kind = NoiseKind::kZipf;
  else throw ConfigError("--noise must be uniform, unigram or zipf");
  spec.alpha = alpha;
  spec.s = s;
  spec.validate();
  return spec;
}

int cmd_consistency(const std::string& counts_text, const std::string& noise_kind,
                    const std::string& ks_text, std::size_t steps, double eta, double max_kl,
                    const std::string& csv) {
  const auto counts = parse_list(counts_text, "--counts");
  std::vector<std::uint64_t> icounts;
  for (double c : counts) {
    if (c <= 0 || c != static_cast<double>(static_cast<std::uint64_t>(c)))
      throw ConfigError("--counts must be positive integers");
    icounts.push_back(static_cast<std::uint64_t>(c));
  }
  if (counts.size() > 64) throw ConfigError("--counts: at most 64 words");
  std::vector<std::size_t> ks;
  for (double k : parse_list(ks_text, "--k")) {
    if (k < 1 || k != static_cast<double>(static_cast<std::size_t>(k)))
      throw ConfigError("--k must be positive integers");
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (steps == 0 || !(eta > 0)) throw ConfigError("--steps and --eta must be positive");
  const NoiseDistribution noise = build_noise_from_counts(icounts, noise_spec(noise_kind, 1.0, 1.0));

  std::cout << "noise " << noise.spec().describe() << ", " << steps << " steps at eta " << eta
            << "\n       k  kl_to_mle     grad_norm     sum_exp_u\n";
  std::ostringstream rows;
  rows << "k,kl_to_mle,grad_norm,self_normalisation,steps\n";
  std::vector<double> kls;
  for (std::size_t k : ks) {
    const auto fit = oracle::nce_consistency_fit(counts, noise, k, steps, eta);
    kls.push_back(fit.kl_to_mle);
    std::cout << std::setw(8) << k << "  " << std::scientific << std::setprecision(4)
              << std::setw(12) << fit.kl_to_mle << "  " << std::setw(12) << fit.grad_norm << "  "
              << std::defaultfloat << std::setprecision(8) << fit.self_normalisation << '\n';
    rows << k << ',' << std::setprecision(17) << fit.kl_to_mle << ',' << fit.grad_norm << ','
         << fit.self_normalisation << ',' << fit.steps << '\n';
  }
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw ConfigError("cannot write " + csv);
    out << rows.str();
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < kls.size(); ++i) decreasing = decreasing && kls[i] < kls[i - 1];
  const bool small = kls.back() < max_kl;
  std::cout << (decreasing ? "PASS" : "FAIL") << " kl decreases with k\n"
            << (small ? "PASS" : "FAIL") << " kl at k=" << ks.back() << " below " << max_kl
            << '\n';
  return decreasing && small ? kOk : kFailed;
}

// --- schedule ------------------------------------------------------------------

int cmd_schedule(const ConfigArgs& ca) {
  const ExperimentConfig cfg = ca.resolve(Preset::kTiny);
  cfg.schedule.validate(cfg.epochs);
  std::cout << "eta0 " << full(cfg.schedule.eta0) << ", tau " << cfg.schedule.tau << ", psi "
            << full(cfg.schedule.psi) << ", " << cfg.epochs << " epochs\nepoch  lr\n";
  for (std::size_t t = 0; t < cfg.epochs; ++t)
    std::cout << std::setw(5) << t << "  " << std::fixed << std::setprecision(6)
              << learning_rate(t, cfg.schedule) << std::defaultfloat << '\n';
  if (cfg.head == HeadKind::kNce)
    if (auto w = tau_warning(cfg.schedule, cfg.epochs)) std::cerr << "warning: " << *w << '\n';
  return kOk;
}

// --- sample-noise ----------------------------------------------------------------

int cmd_sample_noise(const ConfigArgs& ca, const std::string& data, std::size_t draws,
                     std::size_t top) {
  const ExperimentConfig cfg = ca.resolve(Preset::kTiny);
  cfg.noise.validate();
  const auto path = split_path(data, "train");
  if (!std::filesystem::is_regular_file(path))
    throw ConfigError("corpus split 'train' not found at " + path.string());
  if (draws == 0) throw ConfigError("-n must be positive");
  const Vocabulary vocab = Vocabulary::build(read_text_file(path), cfg.vocab_max);
  const NoiseDistribution noise = build_noise(vocab, cfg.noise.dist);
  RngStream rng = RngStream::for_role(cfg.seed, StreamRole::kNoise);
  std::vector<std::uint64_t> hits(vocab.size(), 0);
  for (std::size_t i = 0; i < draws; ++i) ++hits[noise.draw(rng)];

  double tv = 0.0;
  for (std::size_t w = 0; w < vocab.size(); ++w)
    tv += std::abs(static_cast<double>(hits[w]) / static_cast<double>(draws) -
                   noise.prob(static_cast<WordId>(w)));
  std::cout << "noise " << noise.spec().describe() << " over |V| " << vocab.size() << ", "
            << draws << " draws\n  id  word            p_noise       empirical\n";
  for (std::size_t w = 0; w < std::min(top, vocab.size()); ++w)
    std::cout << std::setw(4) << w << "  " << std::left << std::setw(14)
              << vocab.word(static_cast<WordId>(w)) << std::right << "  " << std::setw(12)
              << full(noise.prob(static_cast<WordId>(w))) << "  " << std::setw(12)
              << full(static_cast<double>(hits[w]) / static_cast<double>(draws)) << '\n';
  std::cout << "total variation " << full(0.5 * tv) << '\n';
  return kOk;
}

// --- init-report -------------------------------------------------------------------

int cmd_init_report(const ConfigArgs& ca) {
  const ExperimentConfig cfg = ca.resolve(Preset::kCustom);
  const InitHeuristic h = cfg.init_heuristic();
  h.validate();
  const InitHeuristic r = h.resolved(cfg.hidden);
  std::cout << std::setprecision(10);
  std::cout << "preset " << preset_name(cfg.preset) << ", hidden " << cfg.hidden << ", init "
            << h.describe() << '\n';
  if (r.kind == InitKind::kGaussian)
    std::cout << "weights ~ N(0, " << r.sigma << "^2)\n";
  else if (r.lo == -r.hi)
    std::cout << "weights ~ U(±" << r.hi << ")\n";
  else
    std::cout << "weights ~ U(" << r.lo << ", " << r.hi << ")\n";
  std::cout << "\n        glorot        glorot_quarter  tuned\n";
  for (auto [name, size, hidden] : {std::tuple{"S", ModelSize::kSmall, 200},
                                    std::tuple{"M", ModelSize::kMedium, 650},
                                    std::tuple{"L", ModelSize::kLarge, 1500}}) {
    const auto n = static_cast<std::size_t>(hidden);
    std::cout << name << std::setw(6) << hidden << "  ±" << std::left << std::setw(12)
              << glorot_range(n, n, false) << "  ±" << std::setw(12)
              << glorot_range(n, n, true) << "  ±" << tuned_init_range(size) << std::right
              << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncelm: LSTM language models with softmax or noise-contrastive estimation"};
  app.require_subcommand(1);
  const std::string keys = "\nConfig keys (INI section.key, also usable with --set):\n" +
                           config_reference() +
                           "\nExit status: 0 ok, 1 failed check or diverged run, 2 usage or "
                           "config error.\n";
  app.footer(keys);

  ConfigArgs train_cfg, sched_cfg, noise_cfg, init_cfg;
  std::string data, out, ckpt, split = "test", csv, counts = "40,30,20,10", noise = "zipf",
                                  ks = "1,10,100,1000";
  std::size_t batch = 0, steps = 0, fit_steps = 100, draws = 100000, top = 20;
  std::uint64_t seed = 19;
  double tol = 1e-4, eta = 1.0, max_kl = 1e-3;

  auto* train = app.add_subcommand("train", "train a model; writes config.ini, metrics.csv, "
                                            "best.ckpt, last.ckpt and report.txt");
  train_cfg.add_to(train);
  train->add_option("-d,--data", data, "corpus directory with train/valid/test text")->required();
  train->add_option("-o,--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "exact-softmax perplexity of a checkpoint");
  eval->add_option("checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("-d,--data", data, "corpus directory")->required();
  eval->add_option("--split", split, "train | valid | test")->capture_default_str();
  eval->add_option("--batch", batch, "batch size (default: from the checkpoint)");
  eval->add_option("--steps", steps, "window length (default: from the checkpoint)");

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient suite");
  grad->add_option("--seed", seed, "seed for the random test tensors")->capture_default_str();
  grad->add_option("--tol", tol, "max relative error")->capture_default_str();
  grad->add_option("--csv", csv, "write per-tensor errors to this file");

  auto* cons = app.add_subcommand("consistency",
                                  "fit a context-free model with the exact NCE expectation");
  cons->add_option("--counts", counts, "comma-separated word counts")->capture_default_str();
  cons->add_option("--noise", noise, "uniform | unigram | zipf")->capture_default_str();
  cons->add_option("--k", ks, "comma-separated noise ratios")->capture_default_str();
  cons->add_option("--steps", fit_steps, "gradient-ascent steps")->capture_default_str();
  cons->add_option("--eta", eta, "step size")->capture_default_str();
  cons->add_option("--max-kl", max_kl, "pass threshold at the largest k")->capture_default_str();
  cons->add_option("--csv", csv, "write the fits to this file");

  auto* sched = app.add_subcommand("schedule", "print the learning rate of every epoch");
  sched_cfg.add_to(sched);

  auto* samp = app.add_subcommand("sample-noise", "draw from the noise distribution");
  noise_cfg.add_to(samp);
  samp->add_option("-d,--data", data, "corpus directory (vocabulary and counts)")->required();
  samp->add_option("-n,--draws", draws, "number of draws")->capture_default_str();
  samp->add_option("--top", top, "rows to print")->capture_default_str();

  auto* init = app.add_subcommand("init-report", "resolved initialisation ranges");
  init_cfg.add_to(init);

  for (auto* sub : app.get_subcommands({})) sub->footer(keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_cfg, data, out);
    if (*eval) return cmd_eval(ckpt, data, split, batch, steps);
    if (*grad) return cmd_grad_check(seed, tol, csv);
    if (*cons) return cmd_consistency(counts, noise, ks, fit_steps, eta, max_kl, csv);
    if (*sched) return cmd_schedule(sched_cfg);
    if (*samp) return cmd_sample_noise(noise_cfg, data, draws, top);
    if (*init) return cmd_init_report(init_cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
