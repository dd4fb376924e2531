#include <cmath>

#include "doctest.h"
#include "ncelm/model.hpp"
#include "ncelm/optim.hpp"
#include "ncelm/rng.hpp"

using namespace ncelm;

TEST_CASE("schedule hand values") {
  CHECK(learning_rate(3, {1.0, 2.0, 7}) == 1.0);
  CHECK(learning_rate(6, {1.0, 2.0, 7}) == 1.0);
  CHECK(learning_rate(7, {1.0, 2.0, 7}) == 0.5);
  CHECK(learning_rate(14, {1.0, 1.15, 12}) == doctest::Approx(std::pow(1.0 / 1.15, 3)).epsilon(1e-15));
  CHECK(learning_rate(14, {1.0, 1.15, 12}) == doctest::Approx(0.657516).epsilon(1e-6));
  CHECK(learning_rate(12, {1.0, 1.15, 12}) == doctest::Approx(0.869565).epsilon(1e-6));
}

TEST_CASE("schedule shape: tau epochs at eta0, then ratio 1/psi") {
  for (auto cfg : {ScheduleConfig{1.0, 2.0, 7}, ScheduleConfig{1.0, 1.2, 25},
                   ScheduleConfig{0.7, 1.15, 12}}) {
    for (std::size_t t = 0; t < cfg.tau; ++t) CHECK(learning_rate(t, cfg) == cfg.eta0);
    for (std::size_t t = cfg.tau - 1; t < 60; ++t)
      CHECK(learning_rate(t + 1, cfg) / learning_rate(t, cfg) ==
            doctest::Approx(1.0 / cfg.psi).epsilon(1e-13));
  }
}

TEST_CASE("schedule validation and the tau warning") {
  CHECK_THROWS((ScheduleConfig{0.0, 2.0, 3}.validate(10)));
  CHECK_THROWS((ScheduleConfig{1.0, 1.0, 3}.validate(10)));
  CHECK_THROWS((ScheduleConfig{1.0, 2.0, 0}.validate(10)));
  CHECK_THROWS((ScheduleConfig{1.0, 2.0, 11}.validate(10)));
  CHECK_NOTHROW((ScheduleConfig{1.0, 2.0, 10}.validate(10)));
  // 2/3 of 55 epochs rounds up to 37
  CHECK_FALSE(tau_warning({1.0, 1.15, 12}, 55).has_value());
  CHECK_FALSE(tau_warning({1.0, 1.15, 37}, 55).has_value());
  CHECK(tau_warning({1.0, 1.15, 38}, 55).has_value());
}

TEST_CASE("glorot ranges") {
  CHECK(glorot_range(200, 200, false) == doctest::Approx(0.1225).epsilon(1e-3));
  CHECK(glorot_range(650, 650, false) == doctest::Approx(std::sqrt(6.0 / 1300.0)).epsilon(1e-15));
  CHECK(glorot_range(1500, 1500, false) == doctest::Approx(0.04472).epsilon(1e-4));
  CHECK(glorot_range(1500, 1500, true) == doctest::Approx(0.011180).epsilon(1e-4));
  CHECK(glorot_range(650, 650, true) == doctest::Approx(0.016984).epsilon(1e-4));
  CHECK(tuned_init_range(ModelSize::kSmall) == 0.0153);
  CHECK(tuned_init_range(ModelSize::kMedium) == 0.00849);
  CHECK(tuned_init_range(ModelSize::kLarge) == 0.00625);
}

TEST_CASE("init draws stay inside the half-open range and replay exactly") {
  const ModelShape shape{30, 8, 8, 2};
  ModelParams a = ModelParams::zeros(shape), b = ModelParams::zeros(shape);
  RngStream ra(5), rb(5);
  const auto h = InitHeuristic::uniform(-0.00849, 0.00849);
  init_params(a, h, ra);
  init_params(b, h, rb);
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].tensor == *tb[i].tensor);
  for (double x : a.embedding.values()) {
    CHECK(x >= -0.00849);
    CHECK(x < 0.00849);
  }
  for (double x : a.layers[0].b.values()) CHECK(x == 0.0);
  for (double x : a.head.bias.values()) CHECK(x == 0.0);
  CHECK(a.head.ln_z(0, 0) == 0.0);
}

TEST_CASE("glorot heuristics resolve against the hidden size") {
  const auto g = InitHeuristic::glorot().resolved(200);
  CHECK(g.kind == InitKind::kExplicit);
  CHECK(g.hi == doctest::Approx(glorot_range(200, 200, false)));
  CHECK(g.lo == -g.hi);
  const auto q = InitHeuristic::glorot_quarter().resolved(1500);
  CHECK(q.hi == doctest::Approx(0.011180).epsilon(1e-4));
  CHECK_THROWS(InitHeuristic::uniform(0.1, -0.1).validate());
  CHECK_THROWS(InitHeuristic::gaussian(0.0).validate());
}

namespace {

Gradients one_block(std::vector<double> values) {
  Gradients g;
  LstmLayerParams l(1, 1);
  l.w_x = Matrix(1, values.size(), values);
  l.w_h = Matrix(4, 1);
  l.b = Matrix(1, 4);
  g.layers.push_back(l);
  return g;
}

}  // namespace

TEST_CASE("clipping") {
  Gradients g = one_block({12.0, 16.0});  // norm 20
  const auto r = clip_by_global_norm(g, {5.0, 1});
  CHECK(r.norm_before == doctest::Approx(20.0));
  CHECK(r.scale == doctest::Approx(0.25));
  CHECK(g.layers[0].w_x(0, 0) == doctest::Approx(3.0));
  CHECK(r.norm_after == doctest::Approx(5.0));

  Gradients small = one_block({0.0, 3.0});
  const auto s = clip_by_global_norm(small, {5.0, 1});
  CHECK(s.scale == 1.0);
  CHECK(small.layers[0].w_x(0, 1) == 3.0);

  Gradients divided = one_block({0.0, 30.0});
  clip_by_global_norm(divided, {5.0, 10});
  CHECK(divided.layers[0].w_x(0, 1) == doctest::Approx(3.0));

  Gradients bad = one_block({1.0, std::nan("")});
  CHECK_THROWS_AS(clip_by_global_norm(bad, {5.0, 1}), std::runtime_error);
}

TEST_CASE("sgd step") {
  const ModelShape shape{4, 2, 2, 1};
  ModelParams p = ModelParams::zeros(shape);
  Gradients g;
  g.layers = {LstmLayerParams(2, 2)};
  g.layers[0].b.fill(1.0);
  g.embedding.rows = {2};
  g.embedding.values = Matrix(1, 2, 1.0);
  g.theta.dense = true;
  g.theta.values = Matrix(4, 2);
  g.bias.dense = true;
  g.bias.values = Matrix(4, 1);

  ModelParams same = p;
  sgd_step(same, g, 0.0);
  CHECK(same.layers[0].b == p.layers[0].b);

  sgd_step(p, g, 0.5);
  for (double x : p.layers[0].b.values()) CHECK(x == -0.5);
  CHECK(p.embedding(2, 0) == -0.5);
  CHECK(p.embedding(1, 0) == 0.0);  // untouched row
}
