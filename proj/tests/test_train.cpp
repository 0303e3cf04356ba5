#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "slfc/io/checkpoint.hpp"
#include "slfc/sim/dataset_io.hpp"
#include "slfc/sim/task.hpp"
#include "slfc/train/adam.hpp"
#include "slfc/train/trainer.hpp"
#include "support/builders.hpp"

using namespace slfc;

namespace {

bool params_equal(const ModelParams& a, const ModelParams& b) {
  bool eq = true;
  std::vector<const Matrix*> av, bv;
  a.visit([&](const std::string&, const Matrix& m) { av.push_back(&m); });
  b.visit([&](const std::string&, const Matrix& m) { bv.push_back(&m); });
  for (std::size_t i = 0; i < av.size(); ++i)
    eq = eq && (av[i]->storage() == bv[i]->storage());
  return eq;
}

PairDataset tiny_dataset(std::size_t demos = 12) {
  HybridTaskSpec s = smoke_task();
  return flatten_pairs(generate_dataset(s, demos, 5));
}

}  // namespace

TEST_CASE("adam leaves parameters alone on zero gradients but advances time") {
  auto [cfg, p] = test::small_model(2, 2, 2, 2, 1);
  ModelParams before = p;
  ParamView view = make_view(p);
  AdamState st = AdamState::init(view);
  NamedGrads grads;
  p.visit([&](const std::string& n, const Matrix& m) {
    grads.emplace_back(n, Matrix(m.rows(), m.cols()));
  });
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  adam_step(view, grads, st, tc);
  CHECK(st.t == 1);
  CHECK(params_equal(p, before));
}

TEST_CASE("first adam step has magnitude about the learning rate") {
  Matrix theta(1, 1, 0.0);
  ParamView view;
  view.tensors.emplace_back("w", &theta);
  AdamState st = AdamState::init(view);
  NamedGrads grads;
  grads.emplace_back("w", Matrix(1, 1, 1.0));
  TrainConfig tc;
  tc.learning_rate = 0.05;
  adam_step(view, grads, st, tc);
  CHECK(std::abs(-theta(0, 0) - tc.learning_rate) < 1e-6);
}

TEST_CASE("non-finite gradients abort with the parameter name") {
  Matrix theta(1, 2, 0.0);
  ParamView view;
  view.tensors.emplace_back("bank", &theta);
  AdamState st = AdamState::init(view);
  NamedGrads grads;
  Matrix g(1, 2, 0.0);
  g(0, 1) = std::numeric_limits<double>::quiet_NaN();
  grads.emplace_back("bank", g);
  TrainConfig tc;
  try {
    adam_step(view, grads, st, tc);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("bank") != std::string::npos);
  }
}

TEST_CASE("gradient clipping rescales to the requested global norm") {
  NamedGrads grads;
  grads.emplace_back("a", Matrix(1, 2, 3.0));
  grads.emplace_back("b", Matrix(1, 2, 4.0));
  double n = global_grad_norm(grads);
  CHECK(n == Catch::Approx(std::sqrt(2 * 9.0 + 2 * 16.0)).margin(1e-12));
  clip_global_norm(grads, 1.0);
  CHECK(global_grad_norm(grads) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("fit with zero epochs returns the seeded initialization") {
  PairDataset data = tiny_dataset();
  ModelConfig cfg;
  cfg.obs_dim = 2;
  cfg.action_dim = 2;
  cfg.latent_dim = 2;
  cfg.num_skills = 3;
  cfg.encoder_hidden = {8};
  cfg.decoder_hidden = {8};
  cfg.switcher_hidden = {8};
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 99;
  FitResult r = fit(data, cfg, tc);
  Rng rng(99);
  ModelParams expect = init_params(cfg, rng);
  CHECK(params_equal(r.params, expect));
  CHECK(r.log.epochs.empty());
}

TEST_CASE("fit rejects mismatched dataset dims before any work") {
  PairDataset data = tiny_dataset();
  ModelConfig cfg;
  cfg.obs_dim = 5;  // dataset has 2
  cfg.action_dim = 2;
  cfg.latent_dim = 2;
  cfg.num_skills = 2;
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(fit(data, cfg, tc), ConfigError);
}

TEST_CASE("identical seeds give bit-identical training runs") {
  PairDataset data = tiny_dataset();
  ModelConfig cfg;
  cfg.obs_dim = 2;
  cfg.action_dim = 2;
  cfg.latent_dim = 2;
  cfg.num_skills = 3;
  cfg.encoder_hidden = {8};
  cfg.decoder_hidden = {8};
  cfg.switcher_hidden = {8};
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 64;
  tc.seed = 7;
  FitResult a = fit(data, cfg, tc);
  FitResult b = fit(data, cfg, tc);
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i)
    CHECK(a.log.epochs[i].mean.total == b.log.epochs[i].mean.total);
}

TEST_CASE("resume from a checkpoint reproduces the uninterrupted run bit-identically") {
  PairDataset data = tiny_dataset();
  ModelConfig cfg;
  cfg.obs_dim = 2;
  cfg.action_dim = 2;
  cfg.latent_dim = 2;
  cfg.num_skills = 2;
  cfg.encoder_hidden = {8};
  cfg.decoder_hidden = {8};
  cfg.switcher_hidden = {8};

  std::string path =
      (std::filesystem::temp_directory_path() / "slfc_resume_test.json").string();

  TrainConfig full;
  full.epochs = 6;
  full.batch_size = 64;
  full.seed = 31;
  FitResult straight = fit(data, cfg, full);

  TrainConfig half = full;
  half.epochs = 3;
  half.checkpoint_interval = 3;
  half.checkpoint_path = path;
  fit(data, cfg, half);

  LoadedModel ckpt = load_model_checkpoint(path);
  REQUIRE(ckpt.train_state.has_value());
  CHECK(ckpt.train_state->next_epoch == 3);
  TrainConfig rest = full;  // epochs = 6
  FitResult resumed = fit_resume(data, ckpt, rest);
  CHECK(params_equal(straight.params, resumed.params));
  std::filesystem::remove(path);
}

TEST_CASE("training improves the objective on a small smoke run") {
  HybridTaskSpec s = smoke_task();
  PairDataset data = flatten_pairs(generate_dataset(s, 40, 17));
  ModelConfig cfg;
  cfg.obs_dim = 2;
  cfg.action_dim = 2;
  cfg.latent_dim = 2;
  cfg.num_skills = 4;
  cfg.encoder_hidden = {16};
  cfg.decoder_hidden = {16};
  cfg.switcher_hidden = {16};
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 256;
  tc.seed = 3;
  tc.learning_rate = 3e-3;  // fast settle for a smoke check
  FitResult r = fit(data, cfg, tc);
  REQUIRE(r.log.epochs.size() == 40);
  double first = r.log.epochs.front().mean.total;
  double last = r.log.epochs.back().mean.total;
  CHECK(last > first);

  // nonincreasing loss trend over the final 10%: mean of the last decile of
  // -total must not exceed the mean of the decile before it (small slack)
  std::size_t dec = 4;
  double tail = 0, prior = 0;
  for (std::size_t i = 0; i < dec; ++i) {
    tail += -r.log.epochs[40 - 1 - i].mean.total;
    prior += -r.log.epochs[40 - 1 - dec - i].mean.total;
  }
  CHECK(tail / dec <= prior / dec + 0.05 * std::abs(prior / dec));

  // log export carries the pinned columns
  std::string csv = r.log.to_csv();
  CHECK(csv.rfind("epoch,recon_obs,recon_act,kl_z,kl_switch,total\n", 0) == 0);
}

TEST_CASE("checkpoint round trip preserves parameters and config") {
  auto [cfg, p] = test::small_model(3, 2, 2, 4, 5);
  test::randomize_params(p, 6);
  std::string path =
      (std::filesystem::temp_directory_path() / "slfc_ckpt_test.json").string();
  save_model_checkpoint(path, cfg, p);
  CHECK(checkpoint_kind(path) == "slfc");
  LoadedModel back = load_model_checkpoint(path);
  CHECK(params_equal(back.params, p));
  CHECK(back.config.num_skills == cfg.num_skills);
  CHECK(back.config.encoder_hidden == cfg.encoder_hidden);
  CHECK_FALSE(back.train_state.has_value());
  std::filesystem::remove(path);
}
