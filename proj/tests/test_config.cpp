#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ncelm/checkpoint.hpp"
#include "ncelm/config.hpp"
#include "ncelm/optim.hpp"
#include "ncelm/rng.hpp"

using namespace ncelm;

namespace {

bool same(const ExperimentConfig& a, const ExperimentConfig& b) { return a.to_text() == b.to_text(); }

}  // namespace

TEST_CASE("preset L values") {
  const auto c = ExperimentConfig::from_preset(Preset::kLarge);
  CHECK(c.hidden == 1500);
  CHECK(c.dropout == 0.6);
  CHECK(c.schedule.tau == 12);
  CHECK(c.schedule.psi == 1.15);
  CHECK(c.epochs == 55);
  CHECK(c.clip.max_norm == 10.0);
  CHECK(c.noise.k == 600);
  CHECK(c.unroll == 35);
  CHECK(c.head == HeadKind::kNce);
  CHECK(c.init_heuristic().resolved(c.hidden).hi == doctest::Approx(0.00625).epsilon(1e-12));
  CHECK(c.validate().empty());
}

TEST_CASE("presets S and M") {
  const auto s = ExperimentConfig::from_preset(Preset::kSmall);
  CHECK(s.hidden == 200);
  CHECK(s.schedule.tau == 7);
  CHECK(s.schedule.psi == 2.0);
  CHECK(s.dropout == 0.0);
  CHECK(s.init_heuristic().resolved(s.hidden).hi == doctest::Approx(0.0153).epsilon(1e-12));
  const auto m = ExperimentConfig::from_preset(Preset::kMedium);
  CHECK(m.hidden == 650);
  CHECK(m.schedule.tau == 25);
  CHECK(m.schedule.psi == 1.2);
  CHECK(m.dropout == 0.5);
  CHECK(m.init_heuristic().resolved(m.hidden).hi == doctest::Approx(0.00849).epsilon(1e-12));
  CHECK(s.validate().empty());
  CHECK(m.validate().empty());
}

TEST_CASE("tiny preset is valid and small") {
  const auto t = ExperimentConfig::from_preset(Preset::kTiny);
  CHECK(t.vocab_max <= 2000);
  CHECK(t.hidden == 64);
  CHECK(t.unroll == 20);
  CHECK(t.batch == 20);
  CHECK(t.epochs == 13);
  CHECK(t.schedule.tau == 8);
  // S's eta0 and clip, rescaled from a sum over T steps to a mean
  CHECK(t.schedule.eta0 == 1.0 * t.unroll);
  CHECK(t.clip.max_norm == 5.0 / t.unroll);
  CHECK(t.noise.k == 50);
  CHECK(t.noise.dist.kind == NoiseKind::kZipf);
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("to_text round-trips every preset") {
  for (auto p : {Preset::kCustom, Preset::kTiny, Preset::kSmall, Preset::kMedium, Preset::kLarge}) {
    const auto c = ExperimentConfig::from_preset(p);
    CHECK(same(parse_config_text(c.to_text()), c));
  }
  auto c = ExperimentConfig::from_preset(Preset::kSmall);
  c.seed = 0xfedcba9876543210ULL;
  c.schedule.eta0 = 0.1 + 0.2;
  c.embeddings_path = "vec/w2v.txt";
  c.noise.sharing = NoiseSharing::kPerPosition;
  c.zmode = ZMode::kLearned;
  const auto back = parse_config_text(c.to_text());
  CHECK(same(back, c));
  CHECK(back.seed == c.seed);
  CHECK(back.schedule.eta0 == c.schedule.eta0);
}

TEST_CASE("keys override the preset") {
  const auto c = parse_config_text(
      "# comment\n[model]\npreset = L\nhidden = 32\n\n[head]\nkind = softmax\n"
      "[schedule]\ntau = 3\n");
  CHECK(c.preset == Preset::kLarge);
  CHECK(c.hidden == 32);
  CHECK(c.head == HeadKind::kSoftmax);
  CHECK(c.schedule.tau == 3);
  CHECK(c.schedule.psi == 1.15);
  CHECK(c.epochs == 55);
}

TEST_CASE("bad config input is rejected") {
  CHECK_THROWS_AS(parse_config_text("[model]\nhiden = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[modle]\nhidden = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("hidden = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[model]\nhidden = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[model]\nhidden = -4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[head]\nkind = hierarchical\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[model]\npreset = XL\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ncelm.ini"), ConfigError);
  try {
    parse_config_text("[model]\nhiden = 3\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.hiden") != std::string::npos);
  }
}

TEST_CASE("validation") {
  auto c = ExperimentConfig::from_preset(Preset::kTiny);
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig::from_preset(Preset::kTiny);
  c.schedule.tau = c.epochs + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig::from_preset(Preset::kTiny);
  c.init = InitChoice::kTuned;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig::from_preset(Preset::kLarge);
  c.schedule.tau = 50;
  CHECK(c.validate().size() == 1);
  c.head = HeadKind::kSoftmax;
  CHECK(c.validate().empty());
}

TEST_CASE("config reference lists every key") {
  const auto ref = config_reference();
  for (const char* key : {"model.preset", "model.hidden", "model.dropout", "head.kind", "head.zmode",
                          "noise.kind", "noise.k", "noise.sharing", "init.kind", "schedule.eta0",
                          "schedule.psi", "schedule.tau", "clip.max_norm", "clip.batch_divisor",
                          "train.epochs", "train.seed", "embeddings.path", "embeddings.lowercase"})
    CHECK(ref.find(key) != std::string::npos);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck;
  ck.config = ExperimentConfig::from_preset(Preset::kTiny);
  ck.config.seed = 77;
  ck.config.hidden = 5;
  ck.config.embed = 3;
  ck.vocab = Vocabulary::from_words({"<unk>", "<eos>", "a", "b"}, {0, 5, 3, 2});
  ck.params = ModelParams::zeros({4, 3, 5, 2});
  RngStream rng(9);
  init_params(ck.params, InitHeuristic::uniform(-0.3, 0.3), rng);
  ck.params.head.ln_z(0, 0) = -0.125;
  ck.rng_states = {{"dropout", "1 2 3"}, {"noise", "four"}};
  ck.best_valid_ppl = 123.456789;
  ck.epoch = 6;
  const auto path = std::filesystem::temp_directory_path() / "ncelm_test_roundtrip.ckpt";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(same(back.config, ck.config));
  CHECK(back.vocab == ck.vocab);
  CHECK(back.rng_states == ck.rng_states);
  CHECK(back.best_valid_ppl == ck.best_valid_ppl);
  CHECK(back.epoch == 6);
  const auto a = ck.params.tensors();
  const auto b = back.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor->values().size() == b[i].tensor->values().size());
    CHECK(std::equal(a[i].tensor->values().begin(), a[i].tensor->values().end(),
                     b[i].tensor->values().begin()));
  }

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTCKPT";
  }
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
