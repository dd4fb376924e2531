#include "ncelm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ncelm {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u64(std::uint64_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw std::runtime_error("checkpoint " + path_ + ": truncated file");
    return to_little(v);
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 32)) throw std::runtime_error("checkpoint " + path_ + ": corrupt string");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("checkpoint " + path_ + ": truncated file");
    return s;
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  Writer w(out);
  out.write(kCheckpointMagic, 6);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.u64(ckpt.epoch);
  w.f64(ckpt.best_valid_ppl);
  w.str(ckpt.config.to_text());
  w.u64(ckpt.vocab.size());
  for (std::size_t i = 0; i < ckpt.vocab.size(); ++i) {
    w.str(ckpt.vocab.words()[i]);
    w.u64(ckpt.vocab.counts()[i]);
  }
  w.u64(ckpt.rng_states.size());
  for (const auto& [role, state] : ckpt.rng_states) {
    w.str(role);
    w.str(state);
  }
  const auto tensors = ckpt.params.tensors();
  w.u64(tensors.size());
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u64(t.tensor->rows());
    w.u64(t.tensor->cols());
    for (double v : t.tensor->values()) w.f64(v);
  }
  if (!out) throw std::runtime_error("error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kCheckpointMagic, 6) != 0)
    throw std::runtime_error("checkpoint " + path.string() + ": bad magic (expected NCELM1)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version " +
                             std::to_string(version));

  Checkpoint c;
  c.epoch = r.u64();
  c.best_valid_ppl = r.f64();
  c.config = parse_config_text(r.str());
  const std::uint64_t vocab = r.u64();
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  words.reserve(vocab);
  counts.reserve(vocab);
  for (std::uint64_t i = 0; i < vocab; ++i) {
    words.push_back(r.str());
    counts.push_back(r.u64());
  }
  c.vocab = Vocabulary::from_words(std::move(words), std::move(counts));
  const std::uint64_t n_rng = r.u64();
  for (std::uint64_t i = 0; i < n_rng; ++i) {
    std::string role = r.str();
    c.rng_states.emplace_back(std::move(role), r.str());
  }

  c.params = ModelParams::zeros(
      {c.vocab.size(), c.config.embed_dim(), c.config.hidden, c.config.layers});
  auto slots = c.params.tensors();
  const std::uint64_t n_tensors = r.u64();
  if (n_tensors != slots.size())
    throw std::runtime_error("checkpoint " + path.string() + ": expected " +
                             std::to_string(slots.size()) + " tensors, found " +
                             std::to_string(n_tensors));
  for (auto& slot : slots) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (name != slot.name || rows != slot.tensor->rows() || cols != slot.tensor->cols())
      throw std::runtime_error("checkpoint " + path.string() + ": tensor " + name + " [" +
                               std::to_string(rows) + " x " + std::to_string(cols) +
                               "] does not match expected " + slot.name + " " +
                               slot.tensor->shape_string());
    for (double& v : slot.tensor->values()) v = r.f64();
  }
  return c;
}

}  // namespace ncelm
