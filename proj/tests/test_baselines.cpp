#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "slfc/baselines/bc.hpp"
#include "slfc/baselines/mdn.hpp"
#include "slfc/model/forward.hpp"
#include "slfc/sim/dataset_io.hpp"
#include "slfc/sim/task.hpp"
#include "support/builders.hpp"

using namespace slfc;

namespace {

BcConfig tiny_bc() {
  BcConfig c;
  c.obs_dim = 2;
  c.action_dim = 2;
  c.hidden = {8};
  return c;
}

MdnConfig tiny_mdn(std::size_t C, std::vector<std::size_t> hidden = {8}) {
  MdnConfig c;
  c.obs_dim = 2;
  c.action_dim = 2;
  c.num_components = C;
  c.hidden = std::move(hidden);
  return c;
}

}  // namespace

TEST_CASE("bc_loss basics") {
  BcConfig cfg = tiny_bc();
  Rng rng(1);
  BcParams p = init_bc_params(cfg, rng);
  // prediction equal to the target scores exactly zero
  Vector pred = bc_act({0.4, -0.2}, p);
  CHECK(bc_loss({0.4, -0.2}, pred, p) == 0.0);

  BcConfig c1;
  c1.obs_dim = 1;
  c1.action_dim = 1;
  c1.hidden = {};
  Rng rng2(2);
  BcParams p1 = init_bc_params(c1, rng2);
  p1.out_w(0, 0) = 0.0;  // predict 0 regardless of input
  CHECK(bc_loss({0.3}, {2.0}, p1) == Catch::Approx(4.0).margin(1e-15));
}

TEST_CASE("bc gradient matches finite differences tightly") {
  BcConfig cfg = tiny_bc();
  Rng rng(3);
  BcParams p = init_bc_params(cfg, rng);
  p.visit([&](const std::string&, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * rng.normal();
  });
  Batch b;
  b.obs = rng.normal_matrix(4, 2);
  b.actions = rng.normal_matrix(4, 2);

  Tape t;
  detail::BoundParams bp(t, p);
  Tape::NodeId loss = build_bc_graph(t, bp, b.obs, b.actions);
  auto adj = t.backward(loss);

  const double eps = 1e-5;
  double worst = 0.0;
  std::size_t k = 0;
  p.visit([&](const std::string&, Matrix& m) {
    Tape::NodeId id = bp.ordered()[k].second;
    for (std::size_t i = 0; i < m.size(); ++i) {
      double saved = m.data()[i];
      m.data()[i] = saved + eps;
      double up = bc_batch_loss(b, p);
      m.data()[i] = saved - eps;
      double dn = bc_batch_loss(b, p);
      m.data()[i] = saved;
      double fd = (up - dn) / (2 * eps);
      double an = adj[id].data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-2}));
    }
    ++k;
  });
  CHECK(worst < 1e-5);
}

TEST_CASE("mdn_loss single component equals the Gaussian log-density") {
  MdnConfig cfg = tiny_mdn(1);
  Rng rng(4);
  MdnParams p = init_mdn_params(cfg, rng);
  Vector o{0.2, -0.5}, u{0.7, 0.1};
  MdnEval e = mdn_eval(o, p, cfg);
  CHECK(mdn_loss(o, u, p, cfg) ==
        Catch::Approx(-mvn_logpdf_diag(u, e.components[0])).margin(1e-12));
}

TEST_CASE("duplicate components collapse to a single component") {
  MdnConfig cfg = tiny_mdn(2, {});
  Rng rng(5);
  MdnParams p = init_mdn_params(cfg, rng);
  // identical heads for both components, uniform weights
  for (std::size_t j = 0; j < p.w_mu.cols(); ++j) {
    p.w_mu(2, j) = p.w_mu(0, j);
    p.w_mu(3, j) = p.w_mu(1, j);
    p.w_logvar(2, j) = p.w_logvar(0, j);
    p.w_logvar(3, j) = p.w_logvar(1, j);
  }
  MdnConfig single = tiny_mdn(1, {});
  Rng rng2(6);
  MdnParams q = init_mdn_params(single, rng2);
  q.w_mu = Matrix(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      q.w_mu(i, j) = p.w_mu(i, j);
      q.w_logvar(i, j) = p.w_logvar(i, j);
    }
  Vector o{0.4, 0.9}, u{-0.3, 0.2};
  CHECK(mdn_loss(o, u, p, cfg) == Catch::Approx(mdn_loss(o, u, q, single)).margin(1e-12));
}

TEST_CASE("mdn_loss matches brute-force linear-space mixture evaluation") {
  MdnConfig cfg = tiny_mdn(4);
  Rng rng(7);
  MdnParams p = init_mdn_params(cfg, rng);
  p.visit([&](const std::string&, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] += 0.4 * rng.normal();
  });
  for (int trial = 0; trial < 100; ++trial) {
    Vector o = rng.normal_vector(2), u = rng.normal_vector(2);
    MdnEval e = mdn_eval(o, p, cfg);
    double mix = 0.0;
    for (std::size_t c = 0; c < 4; ++c)
      mix += std::exp(e.weights.log_probs[c]) * std::exp(mvn_logpdf_diag(u, e.components[c]));
    CHECK(mdn_loss(o, u, p, cfg) == Catch::Approx(-std::log(mix)).margin(1e-10));
  }
}

TEST_CASE("mdn_act modes") {
  MdnConfig cfg = tiny_mdn(1);
  Rng rng(8);
  MdnParams p = init_mdn_params(cfg, rng);
  CHECK(mdn_act({0.0, 0.0}, p, cfg, false).component == 1);

  // weights [0.9, 0.1] -> mean mode picks component 1's mean
  MdnConfig c2 = tiny_mdn(2, {});
  Rng rng2(9);
  MdnParams p2 = init_mdn_params(c2, rng2);
  p2.b_pi(0, 0) = std::log(0.9);
  p2.b_pi(0, 1) = std::log(0.1);
  MdnAction act = mdn_act({0.3, 0.3}, p2, c2, false);
  CHECK(act.component == 1);
  MdnEval e = mdn_eval({0.3, 0.3}, p2, c2);
  CHECK(act.action == e.components[0].mean);

  // sampled component frequencies match the weights
  Rng sampler(10);
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i)
    first += mdn_act({0.3, 0.3}, p2, c2, true, &sampler).component == 1 ? 1 : 0;
  double freq = static_cast<double>(first) / n;
  CHECK(std::abs(freq - 0.9) < 3.0 * std::sqrt(0.9 * 0.1 / n));
}

TEST_CASE("mdn gradients match finite differences") {
  MdnConfig cfg = tiny_mdn(3);
  Rng rng(11);
  MdnParams p = init_mdn_params(cfg, rng);
  p.visit([&](const std::string&, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * rng.normal();
  });
  Batch b;
  b.obs = rng.normal_matrix(3, 2);
  b.actions = rng.normal_matrix(3, 2);

  Tape t;
  detail::BoundParams bp(t, p);
  Tape::NodeId loss = build_mdn_graph(t, bp, cfg, b.obs, b.actions);
  auto adj = t.backward(loss);

  auto eval = [&]() {
    Tape t2;
    detail::BoundParams bp2(t2, p);
    return t2.scalar_value(build_mdn_graph(t2, bp2, cfg, b.obs, b.actions));
  };
  const double eps = 1e-5;
  double worst = 0.0;
  std::size_t k = 0;
  p.visit([&](const std::string&, Matrix& m) {
    Tape::NodeId id = bp.ordered()[k].second;
    for (std::size_t i = 0; i < m.size(); ++i) {
      double saved = m.data()[i];
      m.data()[i] = saved + eps;
      double up = eval();
      m.data()[i] = saved - eps;
      double dn = eval();
      m.data()[i] = saved;
      double fd = (up - dn) / (2 * eps);
      double an = adj[id].data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3}));
    }
    ++k;
  });
  CHECK(worst < 1e-4);
}

TEST_CASE("the free-mean model's action term matches mdn_loss on shared parameters") {
  // affine configurations on both sides so the parameter mapping is exact
  const std::size_t D = 2, C = 3;
  ModelConfig mcfg;
  mcfg.obs_dim = D;
  mcfg.action_dim = D;
  mcfg.latent_dim = D;
  mcfg.num_skills = C;
  mcfg.encoder_hidden = {};
  mcfg.decoder_hidden = {};
  mcfg.switcher_hidden = {};
  mcfg.feedback_structure = false;  // free per-skill affine means
  Rng rng(12);
  ModelParams mp = init_params(mcfg, rng);
  test::randomize_params(mp, 13, 0.4);

  MdnConfig bcfg;
  bcfg.obs_dim = D;
  bcfg.action_dim = D;
  bcfg.num_components = C;
  bcfg.hidden = {};
  bcfg.var_floor = mcfg.var_floor;
  Rng rng2(14);
  MdnParams bp = init_mdn_params(bcfg, rng2);
  // shared parameters: switcher -> weight head, free means -> mean head,
  // action-noise head -> log-variance head
  bp.w_pi = mp.switch_w;
  bp.b_pi = mp.switch_b;
  bp.w_mu = mp.free_mean_w;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < D; ++i) bp.b_mu(0, c * D + i) = mp.free_mean_b(c, i);
  bp.w_logvar = mp.noise_w;
  bp.b_logvar = mp.noise_b;

  Rng probe(15);
  for (int trial = 0; trial < 50; ++trial) {
    Vector z = probe.normal_vector(D);  // identify latent with observation
    Vector u = probe.normal_vector(D);
    double model_term = mixture_action_density(z, u, mp, mcfg);
    CHECK(model_term == Catch::Approx(-mdn_loss(z, u, bp, bcfg)).margin(1e-9));

    // the elbo's action terms collapse to the same quantity
    Vector o = z;  // encoder output is irrelevant to the identity below
    ElboBreakdown b = elbo_step(o, u, mp, mcfg, Vector(D, 0.0));
    Vector zz = encode(o, mp, mcfg).mean;
    double collapsed = b.recon_act - b.kl_switch;
    CHECK(collapsed == Catch::Approx(mixture_action_density(zz, u, mp, mcfg)).margin(1e-9));
  }
}

TEST_CASE("bc and mdn training reduce their losses") {
  HybridTaskSpec s = smoke_task();
  PairDataset data = flatten_pairs(generate_dataset(s, 30, 19));
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 128;
  tc.learning_rate = 3e-3;
  tc.seed = 20;

  BcConfig bc;
  bc.obs_dim = 2;
  bc.action_dim = 2;
  bc.hidden = {16};
  BcFitResult bres = bc_fit(data, bc, tc);
  CHECK(bres.epoch_loss.back() < bres.epoch_loss.front());

  MdnConfig mc = tiny_mdn(3, {16});
  MdnFitResult mres = mdn_fit(data, mc, tc);
  CHECK(mres.epoch_loss.back() < mres.epoch_loss.front());
}
