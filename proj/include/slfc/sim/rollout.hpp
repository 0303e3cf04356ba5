#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/model/forward.hpp"
#include "slfc/sim/task.hpp"

namespace slfc {

enum class RolloutMode { kSample, kMean };

inline RolloutMode rollout_mode_from_name(const std::string& s) {
  if (s == "sample") return RolloutMode::kSample;
  if (s == "mean") return RolloutMode::kMean;
  throw ConfigError("unknown rollout mode '" + s + "' (expected sample|mean)");
}

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kMean;
  std::uint64_t seed = 0;
  std::optional<Vector> start;  // state; drawn from the spec's start box when absent
  double obs_noise_scale = 0.0;
  Vector obs_noise_std;         // per stacked-obs dim; required when scale > 0
  double proc_noise_std = 0.0;  // absolute, added to each state transition
};

struct RolloutResult {
  Trajectory trajectory;        // what the policy saw and did
  std::vector<Vector> latents;  // z path, one entry per executed step
  std::vector<int> skills;      // 1-based, aligned with latents
  bool success = false;
  std::size_t steps_to_success = 0;  // 0 when unsuccessful
  bool aborted = false;
  std::string diagnostic;
};

namespace detail {

inline bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// Closed-loop skill execution: encode the observation, pick the
/// highest-prior skill (ties to the lowest index), apply that skill's policy
/// mean, step the environment. Stops on success (within the success radius
/// of the final true goal) or after the horizon.
inline RolloutResult rollout(const ModelParams& params, const ModelConfig& cfg,
                             const HybridTaskSpec& spec, const RolloutOptions& opts) {
  spec.validate();
  if (cfg.obs_dim != spec.obs_dim() || cfg.action_dim != spec.action_dim())
    throw ConfigError("rollout: model dims incompatible with task spec");
  if (opts.obs_noise_scale < 0.0)
    throw ContractError("rollout: obs_noise_scale must be nonnegative");
  if (opts.obs_noise_scale > 0.0 && opts.obs_noise_std.size() != spec.obs_dim())
    throw ContractError("rollout: obs_noise_std must match stacked obs dim");

  Rng rng(opts.seed);
  const std::size_t d = spec.state_dim;
  Vector x(d);
  if (opts.start) {
    if (opts.start->size() != d) throw ShapeError("rollout: start state has wrong length");
    x = *opts.start;
  } else {
    for (std::size_t i = 0; i < d; ++i)
      x[i] = rng.uniform(spec.start_low[i], spec.start_high[i]);
  }

  detail::ObsStack stack(spec, observe(spec, x));
  const Vector& final_goal = spec.true_goals[spec.num_true_skills - 1];

  RolloutResult res;
  std::vector<Vector> obs_rows, act_rows;

  for (std::size_t t = 0; t < spec.horizon; ++t) {
    Vector o = stack.stacked();
    if (opts.obs_noise_scale > 0.0)
      for (std::size_t i = 0; i < o.size(); ++i)
        o[i] += opts.obs_noise_scale * opts.obs_noise_std[i] * rng.normal();

    DiagGaussian enc = encode(o, params, cfg);
    Vector z;
    if (opts.mode == RolloutMode::kSample) {
      z = reparam_sample(enc, rng.normal_vector(cfg.latent_dim)).z;
    } else {
      z = enc.mean;
    }
    std::size_t c = switch_prior(z, params, cfg).argmax() + 1;
    Vector u = policy(z, c, params, cfg).mean;
    if (!detail::all_finite(u)) {
      res.aborted = true;
      res.diagnostic = "non-finite action at step " + std::to_string(t);
      break;
    }

    obs_rows.push_back(o);
    act_rows.push_back(u);
    res.latents.push_back(z);
    res.skills.push_back(static_cast<int>(c));

    x = add(x, u);
    if (opts.proc_noise_std > 0.0)
      for (auto& xi : x) xi += opts.proc_noise_std * rng.normal();
    stack.push(observe(spec, x));

    if (dist2(x, final_goal) < spec.success_radius) {
      res.success = true;
      res.steps_to_success = t + 1;
      break;
    }
  }

  res.trajectory.task_id = spec.name;
  res.trajectory.obs = Matrix(obs_rows.size(), spec.obs_dim());
  res.trajectory.actions = Matrix(act_rows.size(), spec.action_dim());
  for (std::size_t t = 0; t < obs_rows.size(); ++t) {
    res.trajectory.obs.set_row(t, obs_rows[t]);
    res.trajectory.actions.set_row(t, act_rows[t]);
  }
  return res;
}

inline RolloutResult rollout(const ModelParams& params, const ModelConfig& cfg,
                             const HybridTaskSpec& spec, RolloutMode mode,
                             std::uint64_t seed) {
  RolloutOptions opts;
  opts.mode = mode;
  opts.seed = seed;
  return rollout(params, cfg, spec, opts);
}

/// o' = o + scale * train_std (.) n, n ~ N(0, I); applied to every timestep.
inline Trajectory add_observation_noise(const Trajectory& traj, double scale,
                                        const Vector& train_std, std::uint64_t seed) {
  if (scale < 0.0) throw ContractError("add_observation_noise: negative scale");
  Trajectory out = traj;
  if (scale == 0.0) return out;
  if (train_std.size() != traj.obs.cols())
    throw ShapeError("add_observation_noise: train_std length mismatch");
  Rng rng(seed);
  for (std::size_t t = 0; t < out.obs.rows(); ++t)
    for (std::size_t j = 0; j < out.obs.cols(); ++j)
      out.obs(t, j) += scale * train_std[j] * rng.normal();
  return out;
}

}  // namespace slfc
