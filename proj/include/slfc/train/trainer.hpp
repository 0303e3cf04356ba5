#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/elbo/elbo.hpp"
#include "slfc/io/checkpoint.hpp"
#include "slfc/io/csv.hpp"
#include "slfc/model/config.hpp"
#include "slfc/model/params.hpp"
#include "slfc/train/adam.hpp"

namespace slfc {

/// All (o, u) pairs of a dataset stacked row-wise; timesteps are treated as
/// exchangeable within an epoch.
struct PairDataset {
  Matrix obs;      // [N x O]
  Matrix actions;  // [N x A]

  std::size_t size() const { return obs.rows(); }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  ElboBreakdown mean;
  double wall_seconds = 0.0;
  double param_norm = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;

  /// Columns: epoch, recon_obs, recon_act, kl_z, kl_switch, total.
  std::string to_csv() const {
    std::string s = "epoch,recon_obs,recon_act,kl_z,kl_switch,total\n";
    for (const auto& e : epochs) {
      s += std::to_string(e.epoch) + ',' + csv_double(e.mean.recon_obs) + ',' +
           csv_double(e.mean.recon_act) + ',' + csv_double(e.mean.kl_z) + ',' +
           csv_double(e.mean.kl_switch) + ',' + csv_double(e.mean.total) + '\n';
    }
    return s;
  }
};

struct FitResult {
  ModelParams params;
  TrainLog log;
};

namespace detail {

inline void fisher_yates(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.integer(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

inline Batch gather_batch(const PairDataset& data, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end) {
  Batch b;
  b.obs = Matrix(end - begin, data.obs.cols());
  b.actions = Matrix(end - begin, data.actions.cols());
  for (std::size_t k = begin; k < end; ++k) {
    for (std::size_t j = 0; j < data.obs.cols(); ++j)
      b.obs(k - begin, j) = data.obs(idx[k], j);
    for (std::size_t j = 0; j < data.actions.cols(); ++j)
      b.actions(k - begin, j) = data.actions(idx[k], j);
  }
  return b;
}

inline void check_fit_inputs(const PairDataset& data, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, const LossWeights& weights) {
  mcfg.validate();
  tcfg.validate();
  weights.validate();
  if (data.size() == 0) throw ConfigError("fit: dataset is empty");
  if (data.obs.cols() != mcfg.obs_dim || data.actions.cols() != mcfg.action_dim)
    throw ConfigError("fit: dataset dims do not match model config");
}

/// Shared epoch loop. `params`, `adam` and `rng` carry the state to continue
/// from; epochs run in [start_epoch, tcfg.epochs).
inline TrainLog run_epochs(const PairDataset& data, const ModelConfig& mcfg,
                           const TrainConfig& tcfg, const LossWeights& weights,
                           ModelParams& params, AdamState& adam, Rng& rng,
                           std::size_t start_epoch) {
  TrainLog log;
  ParamView view = make_view(params);
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  NamedGrads grads;

  for (std::size_t epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    // reshuffle from identity so a resumed run sees the same batch order
    std::iota(idx.begin(), idx.end(), 0);
    fisher_yates(idx, rng);
    double sum_ro = 0, sum_ra = 0, sum_kz = 0, sum_ks = 0;
    for (std::size_t begin = 0; begin < n; begin += tcfg.batch_size) {
      std::size_t end = std::min(begin + tcfg.batch_size, n);
      Batch batch = gather_batch(data, idx, begin, end);
      Matrix noise(end - begin, mcfg.latent_dim);
      for (std::size_t i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
      BatchElbo be = batch_elbo_grad(batch, params, mcfg, weights, noise, grads);
      clip_global_norm(grads, tcfg.grad_clip_norm);
      adam_step(view, grads, adam, tcfg);
      double bs = static_cast<double>(end - begin);
      sum_ro += be.mean.recon_obs * bs;
      sum_ra += be.mean.recon_act * bs;
      sum_kz += be.mean.kl_z * bs;
      sum_ks += be.mean.kl_switch * bs;
    }
    EpochStats st;
    st.epoch = epoch + 1;
    double dn = static_cast<double>(n);
    st.mean = ElboBreakdown::assemble(sum_ro / dn, sum_ra / dn, sum_kz / dn, sum_ks / dn);
    st.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.param_norm = params.l2_norm();
    log.epochs.push_back(st);

    if (tcfg.checkpoint_interval > 0 && !tcfg.checkpoint_path.empty() &&
        (epoch + 1) % tcfg.checkpoint_interval == 0) {
      TrainState ts;
      ts.adam = adam;
      ts.rng_state = rng.serialize();
      ts.next_epoch = epoch + 1;
      save_model_checkpoint(tcfg.checkpoint_path, mcfg, params, &ts);
    }
  }
  return log;
}

}  // namespace detail

/// Shuffled-minibatch Adam optimization of the per-pair objective.
/// Fully determined by (dataset, configs, seed). epochs = 0 returns the
/// seeded initialization untouched.
inline FitResult fit(const PairDataset& data, const ModelConfig& mcfg,
                     const TrainConfig& tcfg,
                     const LossWeights& weights = LossWeights{}) {
  detail::check_fit_inputs(data, mcfg, tcfg, weights);
  Rng rng(tcfg.seed);
  FitResult out;
  out.params = init_params(mcfg, rng);
  AdamState adam = AdamState::init(make_view(out.params));
  out.log = detail::run_epochs(data, mcfg, tcfg, weights, out.params, adam, rng, 0);
  return out;
}

/// Continues an interrupted run from a checkpoint that carried train state;
/// given the serialized RNG this reproduces the uninterrupted run
/// bit-identically.
inline FitResult fit_resume(const PairDataset& data, const LoadedModel& ckpt,
                            const TrainConfig& tcfg,
                            const LossWeights& weights = LossWeights{}) {
  if (!ckpt.train_state) throw ConfigError("fit_resume: checkpoint has no train state");
  detail::check_fit_inputs(data, ckpt.config, tcfg, weights);
  FitResult out;
  out.params = ckpt.params;
  AdamState adam = ckpt.train_state->adam;
  Rng rng = Rng::deserialize(ckpt.train_state->rng_state);
  out.log = detail::run_epochs(data, ckpt.config, tcfg, weights, out.params, adam, rng,
                               ckpt.train_state->next_epoch);
  return out;
}

}  // namespace slfc
