#ifndef NCELM_TRAINER_HPP
#define NCELM_TRAINER_HPP

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncelm/config.hpp"
#include "ncelm/corpus.hpp"
#include "ncelm/model.hpp"
#include "ncelm/noise.hpp"
#include "ncelm/rng.hpp"

namespace ncelm {

struct Corpus {
  Vocabulary vocab;
  TokenStream train;
  TokenStream valid;
  TokenStream test;
};

// Reads <dir>/train.txt, valid.txt, test.txt (or the ptb.*.txt names) and
// builds the vocabulary from the training split.
Corpus load_corpus(const std::filesystem::path& dir, std::size_t vocab_max);
// Split file path inside `dir` for "train", "valid" or "test".
std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_obj = 0.0;  // cross-entropy (softmax) or NCE loss
  double train_ppl_proxy = 0.0;
  double valid_ppl = 0.0;
  double seconds = 0.0;
};

inline constexpr char kMetricsHeader[] = "epoch,lr,train_obj,train_ppl_proxy,valid_ppl,seconds";
std::string metrics_csv_row(const EpochMetrics& m);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The three independent random streams of a run.
struct RunStreams {
  RngStream init;
  RngStream dropout;
  RngStream noise;

  explicit RunStreams(std::uint64_t seed)
      : init(RngStream::for_role(seed, StreamRole::kInit)),
        dropout(RngStream::for_role(seed, StreamRole::kDropout)),
        noise(RngStream::for_role(seed, StreamRole::kNoise)) {}
};

// Fresh parameters for `cfg` (and optional pretrained embeddings).
ModelParams initial_params(const ExperimentConfig& cfg, const Vocabulary& vocab,
                           RngStream& init_rng);

// One pass over `train`: forward with dropout, head loss, backward with
// truncation at batch boundaries, clipping, and SGD at learning_rate(epoch).
// Fills epoch, lr, train_obj and seconds. Throws TrainingDiverged on a
// non-finite loss or gradient, naming the batch and echoing the config.
EpochMetrics train_epoch(ModelParams& params, const TokenStream& train,
                         const ExperimentConfig& cfg, std::size_t epoch, RunStreams& streams,
                         const NoiseDistribution* noise);

// exp(mean -ln P(target | context)) under the exact softmax, eval mode,
// state carried across batches from zero. The batch size shrinks when the
// stream is too short for `batch_size` rows. Throws on fewer than 2 tokens.
double evaluate_ppl(const ModelParams& params, const TokenStream& stream, std::size_t batch_size,
                    std::size_t steps);

// Unigram (training-count) perplexity of `stream`, with add-one smoothing.
double unigram_ppl(const Vocabulary& vocab, const TokenStream& train, const TokenStream& stream);

struct ExperimentReport {
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_valid_ppl = 0.0;
  double last_valid_ppl = 0.0;
  double last_test_ppl = 0.0;
  double best_test_ppl = 0.0;
  double reported_test_ppl = 0.0;  // best when early_stop, otherwise last
  std::vector<std::string> warnings;
};

using ProgressFn = std::function<void(const EpochMetrics&)>;

// Full run: writes <out>/config.ini, metrics.csv (one row per epoch),
// best.ckpt, last.ckpt and report.txt.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Corpus& corpus,
                                const std::filesystem::path& out_dir,
                                const ProgressFn& progress = {});
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir,
                                const ProgressFn& progress = {});

}  // namespace ncelm

#endif  // NCELM_TRAINER_HPP
