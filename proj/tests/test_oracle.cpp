#include <cmath>
#include <numeric>
#include <string>

#include "doctest.h"
#include "ncelm/oracle.hpp"

using namespace ncelm;
namespace o = ncelm::oracle;

namespace {

const std::vector<double> kCounts{40, 30, 20, 10};

NoiseDistribution zipf4() {
  const std::vector<std::uint64_t> c{40, 30, 20, 10};
  return build_noise_from_counts(c, {NoiseKind::kZipf, 1.0, 1.0});
}

std::vector<double> log_of_normalised(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<double> u;
  for (double c : counts) u.push_back(std::log(c / total));
  return u;
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST_CASE("relative error") {
  CHECK(o::relative_error(1.0, 1.0) == 0.0);
  CHECK(o::relative_error(2.0, 1.0) == 0.5);
  CHECK(o::relative_error(0.0, 1e-12) == doctest::Approx(1e-4));
  CHECK(o::relative_error(-1.0, 1.0) == 2.0);
}

TEST_CASE("finite differences: quadratic and constant") {
  const o::ScalarFn quad = [](std::span<const double> x) {
    return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  };
  const std::vector<double> x{1.0, 2.0};
  const auto g = o::finite_diff_grad(quad, x);
  CHECK(std::abs(g[0] - 2.0) < 1e-8);
  CHECK(std::abs(g[1] - 4.0) < 1e-8);
  const auto z = o::finite_diff_grad([](std::span<const double>) { return 3.5; }, x);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("finite differences reject a non-deterministic loss") {
  int calls = 0;
  const o::ScalarFn flaky = [&](std::span<const double>) { return static_cast<double>(++calls); };
  CHECK_THROWS(o::finite_diff_grad(flaky, std::vector<double>{0.0}));
}

TEST_CASE("check_gradients finds a wrong gradient") {
  Matrix w(1, 3);
  w(0, 0) = 1.0;
  w(0, 1) = -2.0;
  w(0, 2) = 0.5;
  auto loss = [&] { return w(0, 0) * w(0, 0) + 3.0 * w(0, 1) + std::sin(w(0, 2)); };
  Matrix good(1, 3), bad(1, 3);
  good(0, 0) = 2.0;
  good(0, 1) = 3.0;
  good(0, 2) = std::cos(0.5);
  bad = good;
  bad(0, 2) *= 1.01;
  const auto ok = o::check_gradients("toy", {{"w", &w, good}}, loss);
  CHECK(ok.passed(1e-7));
  CHECK(w(0, 2) == 0.5);
  const auto wrong = o::check_gradients("toy", {{"w", &w, bad}}, loss);
  CHECK_FALSE(wrong.passed(1e-4));
  CHECK(wrong.tensors[0].worst_index == 2);
}

TEST_CASE("gradcheck suite passes at the default seed") {
  const auto reports = o::run_gradcheck_suite(19);
  REQUIRE(reports.size() >= 6);
  double worst = 0.0;
  for (const auto& r : reports) {
    CAPTURE(r.component);
    CHECK(r.passed(1e-4));
    worst = std::max(worst, r.max_rel_err());
  }
  CHECK(worst < 1e-4);
  const std::string csv = o::reports_csv(reports);
  CHECK(csv.rfind("tensor,max_rel_err,coord,h\n", 0) == 0);
  CHECK(csv.find("lstm_cell/") != std::string::npos);
  const std::string text = o::reports_text(reports, 1e-4);
  CHECK(text.find("FAIL") == std::string::npos);
}

TEST_CASE("kl divergence") {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  CHECK(o::kl_divergence(p, p) == 0.0);
  CHECK(o::kl_divergence(p, q) ==
        doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75)).epsilon(1e-14));
}

TEST_CASE("consistency: uniform counts are fitted exactly") {
  const std::vector<double> counts(6, 5.0);
  const std::vector<std::uint64_t> ic(6, 5);
  const auto noise = build_noise_from_counts(ic, {NoiseKind::kUniform, 1.0, 1.0});
  for (std::size_t k : {1, 10, 100}) {
    const auto fit = o::nce_consistency_fit(counts, noise, k, 2000, 1.0);
    CHECK(fit.kl_to_mle < 1e-6);
    CHECK(fit.self_normalisation == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("consistency: KL shrinks with k and is small at k = 1000") {
  const auto noise = zipf4();
  double prev = 1.0;
  for (std::size_t k : {1, 10, 100, 1000}) {
    const auto fit = o::nce_consistency_fit(kCounts, noise, k, 100, 1.0);
    CAPTURE(k);
    CHECK(fit.kl_to_mle < prev);
    prev = fit.kl_to_mle;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("the MLE is a stationary point of the expected objective for every k") {
  const auto noise = zipf4();
  const auto u = log_of_normalised(kCounts);
  std::vector<double> q{0.4, 0.3, 0.2, 0.1};
  for (std::size_t k : {1, 10, 100, 1000}) {
    CHECK(norm(o::nce_expected_gradient(u, q, noise.probs(), k)) < 1e-6);
    // and a strict local maximum: moving away lowers J
    auto v = u;
    v[0] += 0.01;
    CHECK(o::nce_expected_objective(v, q, noise.probs(), k) <
          o::nce_expected_objective(u, q, noise.probs(), k));
  }
}

TEST_CASE("expected gradient matches finite differences of the objective") {
  const auto noise = zipf4();
  const std::vector<double> q{0.4, 0.3, 0.2, 0.1};
  const std::vector<double> u{-0.3, -1.1, 0.2, -2.0};
  for (std::size_t k : {1, 7, 600}) {
    const auto g = o::nce_expected_gradient(u, q, noise.probs(), k);
    const auto fd = o::finite_diff_grad(
        [&](std::span<const double> x) { return o::nce_expected_objective(x, q, noise.probs(), k); },
        u);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(o::relative_error(g[i], fd[i]) < 1e-6);
  }
}

TEST_CASE("noise term weighted by k Pn equals direct summation") {
  // k * sum_w Pn_w ln(1 - s_w) against k independent copies of the sum.
  const auto noise = zipf4();
  const std::vector<double> q{0.4, 0.3, 0.2, 0.1};
  const std::vector<double> u{-0.7, -1.3, -1.9, -2.2};
  const std::size_t k = 9;
  double data = 0.0, direct = 0.0;
  for (std::size_t w = 0; w < 4; ++w) {
    const double delta = u[w] - std::log(static_cast<double>(k) * noise.prob(static_cast<WordId>(w)));
    const double s = 1.0 / (1.0 + std::exp(-delta));
    data += q[w] * std::log(s);
    for (std::size_t j = 0; j < k; ++j) direct += noise.prob(static_cast<WordId>(w)) * std::log1p(-s);
  }
  CHECK(std::abs(o::nce_expected_objective(u, q, noise.probs(), k) - (data + direct)) < 1e-10);
}

TEST_CASE("sampled NCE gradients approach the exact expectation") {
  const auto noise = zipf4();
  const std::vector<double> u{-0.7, -1.3, -1.9, -2.2};
  RngStream rng_a(21), rng_b(21);
  const auto few = o::sampled_vs_exact_nce(kCounts, u, noise, 5, 100, rng_a);
  const auto many = o::sampled_vs_exact_nce(kCounts, u, noise, 5, 10000, rng_b);
  CHECK(few.exact == many.exact);
  CHECK(many.max_abs_dev < few.max_abs_dev);
  CHECK(many.rms_dev < few.rms_dev);
  CHECK(many.max_abs_dev < 0.01);
}
