#include "ncelm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ncelm/optim.hpp"
#include "ncelm/rng.hpp"

namespace ncelm {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

// Calls on_token(word) per whitespace token and on_eos() per '\n'.
template <typename TokenFn, typename EosFn>
void tokenize(std::string_view text, TokenFn on_token, EosFn on_eos) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      on_eos();
      ++i;
    } else if (is_space(c)) {
      ++i;
    } else {
      std::size_t j = i;
      while (j < n && text[j] != '\n' && !is_space(text[j])) ++j;
      on_token(text.substr(i, j - i));
      i = j;
    }
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Vocabulary Vocabulary::build(std::string_view text, std::size_t max_size) {
  if (max_size < 2) throw std::invalid_argument("build_vocab: max_size must be >= 2");
  struct Entry {
    std::uint64_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> entries;
  std::vector<std::string> order;  // first-occurrence order
  std::size_t position = 0;
  std::size_t tokens = 0;
  auto bump = [&](std::string_view w) {
    auto [it, inserted] = entries.try_emplace(std::string(w));
    if (inserted) {
      it->second.first = position;
      order.push_back(it->first);
    }
    ++it->second.count;
    ++position;
  };
  tokenize(
      text,
      [&](std::string_view w) {
        bump(w);
        ++tokens;
      },
      [&] { bump(kEosToken); });
  if (tokens == 0) throw std::invalid_argument("build_vocab: corpus contains no tokens");

  const std::string unk(kUnkToken), eos(kEosToken);
  for (const auto& special : {unk, eos}) {
    auto [it, inserted] = entries.try_emplace(special);
    if (inserted) {
      it->second.first = position++;
      order.push_back(special);
    }
  }

  auto by_frequency = [&](const std::string& a, const std::string& b) {
    const Entry& ea = entries.at(a);
    const Entry& eb = entries.at(b);
    if (ea.count != eb.count) return ea.count > eb.count;
    return ea.first < eb.first;
  };
  std::vector<std::string> ranked = order;
  std::stable_sort(ranked.begin(), ranked.end(), by_frequency);

  // Keep the top words, reserving room for the specials.
  std::vector<std::string> kept;
  std::size_t regular_budget = max_size - 2;
  for (const auto& w : ranked) {
    if (w == unk || w == eos) continue;
    if (kept.size() == regular_budget) break;
    kept.push_back(w);
  }
  Entry& unk_entry = entries.at(unk);
  std::unordered_map<std::string, bool> keep_set;
  for (const auto& w : kept) keep_set[w] = true;
  for (const auto& w : ranked) {
    if (w == unk || w == eos || keep_set.count(w)) continue;
    const Entry& e = entries.at(w);
    unk_entry.count += e.count;
    unk_entry.first = std::min(unk_entry.first, e.first);
  }
  kept.push_back(unk);
  kept.push_back(eos);
  std::stable_sort(kept.begin(), kept.end(), by_frequency);

  Vocabulary v;
  v.words_ = std::move(kept);
  v.counts_.reserve(v.words_.size());
  for (const auto& w : v.words_) v.counts_.push_back(entries.at(w).count);
  v.index();
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words,
                                  std::vector<std::uint64_t> counts) {
  if (words.size() != counts.size())
    throw std::invalid_argument("Vocabulary: words and counts differ in length");
  Vocabulary v;
  v.words_ = std::move(words);
  v.counts_ = std::move(counts);
  v.index();
  return v;
}

void Vocabulary::index() {
  lookup_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!lookup_.emplace(words_[i], static_cast<WordId>(i)).second)
      throw std::invalid_argument("Vocabulary: duplicate word '" + words_[i] + "'");
  }
  auto u = lookup_.find(std::string(kUnkToken));
  auto e = lookup_.find(std::string(kEosToken));
  if (u == lookup_.end() || e == lookup_.end())
    throw std::invalid_argument("Vocabulary: missing <unk> or <eos>");
  unk_ = u->second;
  eos_ = e->second;
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = lookup_.find(std::string(word));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

WordId Vocabulary::id(std::string_view word) const { return find(word).value_or(unk_); }

TokenStream encode(const Vocabulary& vocab, std::string_view text) {
  TokenStream s;
  tokenize(
      text, [&](std::string_view w) { s.ids.push_back(vocab.id(w)); },
      [&] { s.ids.push_back(vocab.eos_id()); });
  return s;
}

std::vector<std::string> decode(const Vocabulary& vocab, const TokenStream& stream) {
  std::vector<std::string> out;
  out.reserve(stream.ids.size());
  for (WordId id : stream.ids) out.push_back(vocab.word(id));
  return out;
}

BatchPlan::BatchPlan(const TokenStream& stream, std::size_t batch_size, std::size_t steps)
    : batch_size_(batch_size), steps_(steps) {
  if (batch_size == 0 || steps == 0)
    throw std::invalid_argument("make_batches: batch size and steps must be positive");
  row_length_ = stream.ids.size() / batch_size;
  if (row_length_ < steps + 1) {
    throw std::invalid_argument(
        "make_batches: stream of " + std::to_string(stream.ids.size()) +
        " tokens is too short for batch " + std::to_string(batch_size) + " x steps " +
        std::to_string(steps) + "; need at least " + std::to_string(batch_size * (steps + 1)));
  }
  rows_.assign(stream.ids.begin(), stream.ids.begin() + static_cast<std::ptrdiff_t>(
                                                            row_length_ * batch_size));
  num_batches_ = (row_length_ - 1) / steps;
}

Batch BatchPlan::window(std::size_t offset, std::size_t len) const {
  Batch b;
  b.batch_size = batch_size_;
  b.steps = len;
  b.x.resize(batch_size_ * len);
  b.y.resize(batch_size_ * len);
  for (std::size_t r = 0; r < batch_size_; ++r) {
    const WordId* row = rows_.data() + r * row_length_;
    for (std::size_t t = 0; t < len; ++t) {
      b.x[r * len + t] = row[offset + t];
      b.y[r * len + t] = row[offset + t + 1];
    }
  }
  return b;
}

Batch BatchPlan::batch(std::size_t index) const {
  if (index >= num_batches_)
    throw std::out_of_range("BatchPlan: batch " + std::to_string(index) + " of " +
                            std::to_string(num_batches_));
  return window(index * steps_, steps_);
}

std::optional<Batch> BatchPlan::tail() const {
  const std::size_t used = num_batches_ * steps_;
  const std::size_t left = row_length_ - 1 - used;
  if (left == 0) return std::nullopt;
  return window(used, left);
}

BatchPlan make_batches(const TokenStream& stream, std::size_t batch_size, std::size_t steps) {
  return BatchPlan(stream, batch_size, steps);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               const EmbeddingLoadOptions& options,
                               const InitHeuristic& fallback, RngStream& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_embeddings: cannot open " + path.string());
  auto fail = [&](std::size_t line_no, const std::string& what) {
    return std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  const auto header = split_fields(line);
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
      dim == 0)
    throw fail(1, "header must be \"count dim\"");
  if (options.expected_dim != 0 && dim != options.expected_dim)
    throw fail(1, "dimension " + std::to_string(dim) + " does not match configured " +
                      std::to_string(options.expected_dim));

  EmbeddingTable out;
  out.fine_tune = options.fine_tune;
  out.table = Matrix(vocab.size(), dim);
  out.found.assign(vocab.size(), false);

  std::size_t entries = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1)
      throw fail(line_no, "expected word and " + std::to_string(dim) + " values, got " +
                              std::to_string(fields.size() - 1) + " values");
    ++entries;
    std::string word(fields[0]);
    if (options.lowercase)
      std::transform(word.begin(), word.end(), word.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::vector<double> values(dim);
    for (std::size_t d = 0; d < dim; ++d)
      if (!parse_number(fields[d + 1], values[d]))
        throw fail(line_no, "bad number '" + std::string(fields[d + 1]) + "'");
    const auto id = vocab.find(word);
    if (!id || out.found[*id]) continue;  // first occurrence wins
    std::copy(values.begin(), values.end(), out.table.row(*id).begin());
    out.found[*id] = true;
  }
  if (entries != count)
    throw fail(line_no, "header announces " + std::to_string(count) + " words, file has " +
                            std::to_string(entries));

  const InitHeuristic init = fallback.resolved(dim);
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (out.found[id]) {
      ++out.matched;
      continue;
    }
    ++out.missing;
    for (double& x : out.table.row(id)) x = init.draw(rng);
  }
  return out;
}

}  // namespace ncelm
