#ifndef NCELM_CORPUS_HPP
#define NCELM_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ncelm/tensor.hpp"

namespace ncelm {

class RngStream;
struct InitHeuristic;

using WordId = std::uint32_t;

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";

// Word <-> id map. Ids are dense and ordered by descending training count,
// ties broken by first occurrence. <unk> and <eos> are always present.
class Vocabulary {
 public:
  // Whitespace tokenisation; every '\n' contributes one <eos>. Keeps at most
  // max_size entries (specials included); dropped words are counted as <unk>.
  // Throws std::invalid_argument on a corpus with no tokens.
  static Vocabulary build(std::string_view text, std::size_t max_size);

  // Rebuilds a vocabulary from an id-ordered word list (checkpoint loading).
  static Vocabulary from_words(std::vector<std::string> words, std::vector<std::uint64_t> counts);

  std::size_t size() const { return words_.size(); }
  WordId id(std::string_view word) const;  // unk id when absent
  std::optional<WordId> find(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::uint64_t count(WordId id) const { return counts_.at(id); }
  WordId unk_id() const { return unk_; }
  WordId eos_id() const { return eos_; }

  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && counts_ == other.counts_;
  }

 private:
  void index();

  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> lookup_;
  WordId unk_ = 0;
  WordId eos_ = 0;
};

struct TokenStream {
  std::vector<WordId> ids;
};

TokenStream encode(const Vocabulary& vocab, std::string_view text);
std::vector<std::string> decode(const Vocabulary& vocab, const TokenStream& stream);

// x and y are batch_size x steps, row-major. y is x shifted by one token.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t steps = 0;
  std::vector<WordId> x;
  std::vector<WordId> y;

  WordId input(std::size_t b, std::size_t t) const { return x[b * steps + t]; }
  WordId target(std::size_t b, std::size_t t) const { return y[b * steps + t]; }
  std::size_t positions() const { return batch_size * steps; }
};

// Continuous-stream layout: the stream is cut into batch_size rows of
// floor(len / batch_size) ids (the remainder is dropped), and each row is
// walked in windows of `steps` ids. Row order is preserved so recurrent state
// can be carried from one batch to the next.
class BatchPlan {
 public:
  BatchPlan(const TokenStream& stream, std::size_t batch_size, std::size_t steps);

  std::size_t batch_size() const { return batch_size_; }
  std::size_t steps() const { return steps_; }
  std::size_t row_length() const { return row_length_; }
  std::size_t num_batches() const { return num_batches_; }

  Batch batch(std::size_t index) const;
  // Positions left after the last full window (fewer than `steps`), if any.
  std::optional<Batch> tail() const;

 private:
  Batch window(std::size_t offset, std::size_t len) const;

  std::vector<WordId> rows_;
  std::size_t batch_size_;
  std::size_t steps_;
  std::size_t row_length_;
  std::size_t num_batches_;
};

// Throws std::invalid_argument when floor(len / batch_size) < steps + 1,
// naming the minimum stream length.
BatchPlan make_batches(const TokenStream& stream, std::size_t batch_size, std::size_t steps);

struct EmbeddingTable {
  Matrix table;             // |V| x dim
  std::vector<bool> found;  // per row: sourced from the file
  std::size_t matched = 0;
  std::size_t missing = 0;
  bool fine_tune = true;
};

struct EmbeddingLoadOptions {
  std::size_t expected_dim = 0;  // 0 accepts the file's dimension
  bool fine_tune = true;
  bool lowercase = false;  // lower-case file words before matching
};

// Reads word2vec text format ("count dim" header, then "word v1 .. vdim").
// Rows for words not in the file are drawn from `fallback`. Throws
// std::runtime_error naming the line on malformed input.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               const EmbeddingLoadOptions& options,
                               const InitHeuristic& fallback, RngStream& rng);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ncelm

#endif  // NCELM_CORPUS_HPP
