#include "ncelm/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ncelm/checkpoint.hpp"
#include "ncelm/optim.hpp"

namespace ncelm {
namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, ptr);
}

}  // namespace

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split) {
  const auto plain = dir / (split + ".txt");
  if (std::filesystem::exists(plain)) return plain;
  const auto ptb = dir / ("ptb." + split + ".txt");
  if (std::filesystem::exists(ptb)) return ptb;
  return plain;
}

Corpus load_corpus(const std::filesystem::path& dir, std::size_t vocab_max) {
  for (const char* split : {"train", "valid", "test"}) {
    const auto p = split_path(dir, split);
    if (!std::filesystem::is_regular_file(p))
      throw std::runtime_error("corpus: missing " + std::string(split) + " split at " +
                               p.string());
  }
  Corpus c;
  const std::string train_text = read_text_file(split_path(dir, "train"));
  c.vocab = Vocabulary::build(train_text, vocab_max);
  c.train = encode(c.vocab, train_text);
  c.valid = encode(c.vocab, read_text_file(split_path(dir, "valid")));
  c.test = encode(c.vocab, read_text_file(split_path(dir, "test")));
  return c;
}

std::string metrics_csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + fmt(m.lr) + "," + fmt(m.train_obj) + "," +
         fmt(m.train_ppl_proxy) + "," + fmt(m.valid_ppl) + "," + fixed(m.seconds, 3);
}

ModelParams initial_params(const ExperimentConfig& cfg, const Vocabulary& vocab,
                           RngStream& init_rng) {
  ModelShape shape{vocab.size(), cfg.embed_dim(), cfg.hidden, cfg.layers};
  ModelParams params = ModelParams::zeros(shape);
  const InitHeuristic init = cfg.init_heuristic().resolved(cfg.hidden);
  init_params(params, init, init_rng);
  if (!cfg.embeddings_path.empty()) {
    EmbeddingLoadOptions opts;
    opts.expected_dim = cfg.embed_dim();
    opts.fine_tune = cfg.fine_tune;
    opts.lowercase = cfg.lowercase;
    EmbeddingTable table = load_embeddings(cfg.embeddings_path, vocab, opts, init, init_rng);
    params.embedding = std::move(table.table);
  }
  return params;
}

EpochMetrics train_epoch(ModelParams& params, const TokenStream& train,
                         const ExperimentConfig& cfg, std::size_t epoch, RunStreams& streams,
                         const NoiseDistribution* noise) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.head == HeadKind::kNce && noise == nullptr)
    throw std::invalid_argument("train_epoch: NCE head needs a noise distribution");
  const BatchPlan plan = make_batches(train, cfg.batch, cfg.unroll);
  const double lr = learning_rate(epoch, cfg.schedule);

  BatchOptions options;
  options.dropout = cfg.dropout_spec();
  options.mode = Mode::kTrain;
  options.train_embedding = cfg.embeddings_path.empty() || cfg.fine_tune;

  LstmState state = LstmState::zeros(cfg.layers, cfg.batch, cfg.hidden);
  Gradients grads;
  double total = 0.0;
  for (std::size_t i = 0; i < plan.num_batches(); ++i) {
    const Batch batch = plan.batch(i);
    NceBatchSample sample;
    Objective objective = SoftmaxObjective{};
    if (cfg.head == HeadKind::kNce) {
      const std::vector<WordId> targets = batch_targets(batch);
      sample = make_nce_sample(targets, *noise,
                               sample_noise(*noise, cfg.noise, targets.size(), streams.noise));
      objective = NceObjective{&sample, cfg.zmode};
    }
    BatchResult r = model_objective(params, batch, state, objective, options, streams.dropout,
                                    &grads, &streams.dropout);
    auto diverged = [&](const std::string& what) {
      return TrainingDiverged("epoch " + std::to_string(epoch) + ", batch " + std::to_string(i) +
                              ": " + what + "\n--- config ---\n" + cfg.to_text());
    };
    if (!std::isfinite(r.loss)) throw diverged("non-finite loss");
    try {
      clip_by_global_norm(grads, cfg.clip);
    } catch (const std::runtime_error& e) {
      throw diverged(e.what());
    }
    sgd_step(params, grads, lr);
    state = std::move(r.final_state);
    total += r.loss;
  }

  EpochMetrics m;
  m.epoch = epoch;
  m.lr = lr;
  m.train_obj = total / static_cast<double>(plan.num_batches());
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

double evaluate_ppl(const ModelParams& params, const TokenStream& stream, std::size_t batch_size,
                    std::size_t steps) {
  const std::size_t len = stream.ids.size();
  if (len < 2) throw std::invalid_argument("evaluate_ppl: stream needs at least 2 tokens");
  if (batch_size == 0 || steps == 0)
    throw std::invalid_argument("evaluate_ppl: batch size and steps must be positive");
  std::size_t b = std::min(batch_size, std::max<std::size_t>(1, len / (steps + 1)));
  std::size_t t = std::min(steps, len / b - 1);
  const BatchPlan plan = make_batches(stream, b, t);

  LstmState state = LstmState::zeros(params.layers.size(), b, params.head.hidden_size());
  double nll = 0.0;
  std::size_t count = 0;
  auto run = [&](const Batch& batch) {
    const Matrix v = context_vectors(params, batch, state, &state);
    const SoftmaxOutput out = softmax_log_probs(params.head, v, batch_targets(batch));
    for (double lp : out.target_log_probs) nll -= lp;
    count += out.target_log_probs.size();
  };
  for (std::size_t i = 0; i < plan.num_batches(); ++i) run(plan.batch(i));
  if (auto tail = plan.tail()) run(*tail);
  return std::exp(nll / static_cast<double>(count));
}

double unigram_ppl(const Vocabulary& vocab, const TokenStream& train, const TokenStream& stream) {
  if (stream.ids.empty()) throw std::invalid_argument("unigram_ppl: empty stream");
  std::vector<double> counts(vocab.size(), 1.0);
  for (WordId id : train.ids) counts.at(id) += 1.0;
  double total = 0.0;
  for (double c : counts) total += c;
  double nll = 0.0;
  for (WordId id : stream.ids) nll -= std::log(counts.at(id) / total);
  return std::exp(nll / static_cast<double>(stream.ids.size()));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir, const ProgressFn& progress) {
  cfg.validate();
  if (!std::filesystem::is_directory(data_dir))
    throw ConfigError("data directory not found: " + data_dir.string());
  for (const char* split : {"train", "valid", "test"}) {
    const auto p = split_path(data_dir, split);
    if (!std::filesystem::is_regular_file(p))
      throw ConfigError("corpus split '" + std::string(split) + "' not found at " + p.string());
  }
  return run_experiment(cfg, load_corpus(data_dir, cfg.vocab_max), out_dir, progress);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Corpus& corpus,
                                const std::filesystem::path& out_dir, const ProgressFn& progress) {
  ExperimentReport report;
  report.warnings = cfg.validate();
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.ini");
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "config.ini").string());
    out << cfg.to_text();
  }

  RunStreams streams(cfg.seed);
  ModelParams params = initial_params(cfg, corpus.vocab, streams.init);
  std::optional<NoiseDistribution> noise;
  if (cfg.head == HeadKind::kNce) noise.emplace(build_noise(corpus.vocab, cfg.noise.dist));

  TokenStream proxy;
  {
    const auto n = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(cfg.train_ppl_fraction *
                                              static_cast<double>(corpus.train.ids.size()))));
    proxy.ids.assign(corpus.train.ids.begin(),
                     corpus.train.ids.begin() +
                         static_cast<std::ptrdiff_t>(std::min(n, corpus.train.ids.size())));
  }

  const auto metrics_path = out_dir / "metrics.csv";
  std::ofstream csv(metrics_path);
  if (!csv) throw std::runtime_error("cannot write " + metrics_path.string());
  csv << kMetricsHeader << '\n';

  auto checkpoint = [&](const ModelParams& p, std::size_t epoch, double best) {
    Checkpoint c;
    c.config = cfg;
    c.vocab = corpus.vocab;
    c.params = p;
    c.rng_states = {{"init", streams.init.state()},
                    {"dropout", streams.dropout.state()},
                    {"noise", streams.noise.state()}};
    c.best_valid_ppl = best;
    c.epoch = epoch;
    return c;
  };

  ModelParams best_params = params;
  report.best_valid_ppl = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics m = train_epoch(params, corpus.train, cfg, epoch, streams,
                                 noise ? &*noise : nullptr);
    const auto eval_start = std::chrono::steady_clock::now();
    m.train_ppl_proxy = evaluate_ppl(params, proxy, cfg.batch, cfg.unroll);
    m.valid_ppl = evaluate_ppl(params, corpus.valid, cfg.batch, cfg.unroll);
    m.seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - eval_start).count();
    csv << metrics_csv_row(m) << '\n';
    csv.flush();
    report.epochs.push_back(m);
    if (m.valid_ppl < report.best_valid_ppl) {
      report.best_valid_ppl = m.valid_ppl;
      report.best_epoch = epoch;
      best_params = params;
      save_checkpoint(out_dir / "best.ckpt", checkpoint(params, epoch, m.valid_ppl));
    }
    if (progress) progress(m);
  }
  save_checkpoint(out_dir / "last.ckpt",
                  checkpoint(params, cfg.epochs - 1, report.best_valid_ppl));

  report.last_valid_ppl = report.epochs.back().valid_ppl;
  report.last_test_ppl = evaluate_ppl(params, corpus.test, cfg.batch, cfg.unroll);
  report.best_test_ppl = evaluate_ppl(best_params, corpus.test, cfg.batch, cfg.unroll);
  report.reported_test_ppl = cfg.early_stop ? report.best_test_ppl : report.last_test_ppl;

  std::ofstream rep(out_dir / "report.txt");
  rep << "vocab_size " << corpus.vocab.size() << '\n'
      << "epochs " << cfg.epochs << '\n'
      << "best_epoch " << report.best_epoch << '\n'
      << "best_valid_ppl " << fmt(report.best_valid_ppl) << '\n'
      << "last_valid_ppl " << fmt(report.last_valid_ppl) << '\n'
      << "best_test_ppl " << fmt(report.best_test_ppl) << '\n'
      << "last_test_ppl " << fmt(report.last_test_ppl) << '\n'
      << "reported_test_ppl " << fmt(report.reported_test_ppl)
      << (cfg.early_stop ? " (best validation epoch)" : " (last epoch)") << '\n';
  for (const auto& w : report.warnings) rep << "warning " << w << '\n';
  return report;
}

}  // namespace ncelm
