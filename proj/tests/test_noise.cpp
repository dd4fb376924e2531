#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>

#include "doctest.h"
#include "ncelm/noise.hpp"
#include "ncelm/rng.hpp"

using namespace ncelm;

namespace {

// Mass each id receives from the alias table: cell c gives prob[c]/n to c
// and (1 - prob[c])/n to alias[c].
std::vector<double> reconstruct(const AliasTable& t) {
  const double n = static_cast<double>(t.prob.size());
  std::vector<double> mass(t.prob.size(), 0.0);
  for (std::size_t c = 0; c < t.prob.size(); ++c) {
    mass[c] += t.prob[c] / n;
    mass[t.alias[c]] += (1.0 - t.prob[c]) / n;
  }
  return mass;
}

void check_vec(std::span<const double> got, std::vector<double> want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= tol);
}

}  // namespace

TEST_CASE("noise distributions") {
  const std::vector<std::uint64_t> four{10, 10, 10, 10};
  check_vec(build_noise_from_counts(four, {NoiseKind::kUniform}).probs(), {0.25, 0.25, 0.25, 0.25},
            1e-15);
  const std::vector<std::uint64_t> ranked{40, 30, 20, 10};
  check_vec(build_noise_from_counts(ranked, {NoiseKind::kZipf, 1.0, 1.0}).probs(),
            {0.48, 0.24, 0.16, 0.12}, 1e-15);
  const std::vector<std::uint64_t> two{3, 1};
  const double r3 = std::sqrt(3.0);
  check_vec(build_noise_from_counts(two, {NoiseKind::kUnigram, 0.5}).probs(),
            {r3 / (r3 + 1.0), 1.0 / (r3 + 1.0)}, 1e-15);
}

TEST_CASE("zipf ranks follow counts, not ids") {
  const std::vector<std::uint64_t> counts{1, 50, 7, 7};
  const auto d = build_noise_from_counts(counts, {NoiseKind::kZipf});
  // ranks: id1 -> 1, id2 -> 2 (tie broken by id), id3 -> 3, id0 -> 4
  CHECK(d.prob(1) == doctest::Approx(0.48));
  CHECK(d.prob(2) == doctest::Approx(0.24));
  CHECK(d.prob(3) == doctest::Approx(0.16));
  CHECK(d.prob(0) == doctest::Approx(0.12));
}

TEST_CASE("unigram floors zero counts at one") {
  const std::vector<std::uint64_t> counts{3, 0};
  const auto d = build_noise_from_counts(counts, {NoiseKind::kUnigram, 1.0});
  CHECK(d.prob(0) == doctest::Approx(0.75));
  CHECK(d.prob(1) == doctest::Approx(0.25));
}

TEST_CASE("invalid noise specs") {
  CHECK_THROWS((NoiseSpec{NoiseKind::kZipf, 1.0, 0.0}.validate()));
  CHECK_THROWS((NoiseSpec{NoiseKind::kUnigram, -1.0}.validate()));
}

TEST_CASE("alias: uniform never takes the alias") {
  const std::vector<double> p(6, 1.0 / 6.0);
  const auto t = alias_build(p);
  for (double c : t.prob) CHECK(c == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alias: exact reconstruction") {
  const std::vector<double> p{0.5, 0.25, 0.25};
  check_vec(reconstruct(alias_build(p)), p, 1e-12);
}

TEST_CASE("alias: reconstruction holds for random distributions") {
  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> p(n);
    double s = 0.0;
    for (double& x : p) s += (x = std::pow(rng.uniform(1e-6, 1.0), 3.0));
    for (double& x : p) x /= s;
    check_vec(reconstruct(alias_build(p)), p, 1e-12);
  }
}

TEST_CASE("alias: rejects bad input") {
  CHECK_THROWS(alias_build(std::vector<double>{}));
  CHECK_THROWS(alias_build(std::vector<double>{0.5, 0.6}));
  CHECK_THROWS(alias_build(std::vector<double>{1.0, 0.0}));
  CHECK_THROWS(alias_build(std::vector<double>{0.5, std::nan("")}));
}

TEST_CASE("sample_noise: shapes and replay") {
  const auto d = build_noise_from_counts(std::vector<std::uint64_t>(1000, 1), {NoiseKind::kZipf});
  NoiseConfig cfg;
  cfg.k = 600;
  RngStream a(3), b(3);
  const auto da = sample_noise(d, cfg, 20, a);
  CHECK(da.ids.size() == 600);
  CHECK(da.probs.size() == 600);
  for (std::size_t i = 0; i < 600; ++i) CHECK(da.probs[i] == d.prob(da.ids[i]));
  CHECK(sample_noise(d, cfg, 20, b).ids == da.ids);

  cfg.sharing = NoiseSharing::kPerPosition;
  cfg.k = 7;
  CHECK(sample_noise(d, cfg, 20, a).ids.size() == 140);
}

TEST_CASE("sample_noise: unique mode") {
  const auto d = build_noise_from_counts(std::vector<std::uint64_t>{100, 50, 20, 5, 1}, {NoiseKind::kUnigram});
  NoiseConfig cfg;
  cfg.k = 5;
  cfg.unique = true;
  RngStream rng(4);
  const auto draw = sample_noise(d, cfg, 3, rng);
  CHECK(std::set<WordId>(draw.ids.begin(), draw.ids.end()).size() == 5);
  cfg.k = 6;
  CHECK_THROWS_AS(sample_noise(d, cfg, 3, rng), std::invalid_argument);
}

TEST_CASE("zipf draws: 1e5 samples within 0.01 of the target") {
  const auto d = build_noise_from_counts(std::vector<std::uint64_t>{4, 3, 2, 1}, {NoiseKind::kZipf});
  RngStream rng(2024);
  std::vector<double> freq(4, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) freq[d.draw(rng)] += 1.0 / n;
  check_vec(freq, {0.48, 0.24, 0.16, 0.12}, 0.01);
}

TEST_CASE("alias draws pass a chi-square goodness-of-fit test") {
  std::vector<std::uint64_t> counts;
  for (int i = 0; i < 50; ++i) counts.push_back(static_cast<std::uint64_t>(1 + (i * 37) % 23));
  const auto d = build_noise_from_counts(counts, {NoiseKind::kUnigram, 0.75});
  RngStream rng(99);
  const int n = 200000;
  std::vector<double> obs(50, 0.0);
  for (int i = 0; i < n; ++i) obs[d.draw(rng)] += 1.0;
  double chi2 = 0.0;
  for (std::size_t w = 0; w < 50; ++w) {
    const double e = n * d.prob(static_cast<WordId>(w));
    chi2 += (obs[w] - e) * (obs[w] - e) / e;
  }
  const boost::math::chi_squared dist(49);
  CHECK(boost::math::cdf(complement(dist, chi2)) > 0.001);
}
