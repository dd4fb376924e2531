#include "ncelm/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ncelm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const char* role_name(StreamRole role) {
  switch (role) {
    case StreamRole::kInit: return "init";
    case StreamRole::kDropout: return "dropout";
    case StreamRole::kNoise: return "noise";
    case StreamRole::kData: return "data";
  }
  return "unknown";
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::for_role(std::uint64_t seed, StreamRole role) {
  return RngStream(seed + static_cast<std::uint64_t>(role));
}

double RngStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("uniform: require lo < hi, got lo=" + std::to_string(lo) +
                                " hi=" + std::to_string(hi));
  }
  const double v = lo + (hi - lo) * uniform01();
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  const std::uint64_t limit = -n % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= limit) return x % n;
  }
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 == 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::string RngStream::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << has_spare_ << ' ';
  os.precision(17);
  os << std::hexfloat << spare_ << ' ' << engine_;
  return os.str();
}

void RngStream::restore(const std::string& state) {
  std::istringstream is(state);
  std::string spare;
  is >> seed_ >> has_spare_ >> spare >> engine_;
  if (!is) throw std::runtime_error("RngStream::restore: malformed state");
  spare_ = std::strtod(spare.c_str(), nullptr);
}

bool RngStream::operator==(const RngStream& other) const {
  return seed_ == other.seed_ && engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
         spare_ == other.spare_;
}

std::vector<double> rng_uniform(RngStream& stream, double lo, double hi, std::size_t n) {
  if (!(lo < hi)) throw std::invalid_argument("rng_uniform: require lo < hi");
  std::vector<double> out(n);
  for (auto& v : out) v = stream.uniform(lo, hi);
  return out;
}

}  // namespace ncelm
