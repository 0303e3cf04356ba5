#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/eval/frechet.hpp"
#include "slfc/model/forward.hpp"
#include "slfc/sim/rollout.hpp"
#include "slfc/sim/task.hpp"

namespace slfc {

enum class NoiseKind { kObservation, kProcess };

inline std::string noise_kind_name(NoiseKind k) {
  return k == NoiseKind::kObservation ? "observation" : "process";
}

struct VariantModel {
  std::string name;
  ModelConfig config;
  ModelParams params;
};

struct SweepRow {
  std::string variant;
  std::string noise_kind;
  double scale = 0.0;
  double distance = 0.0;
};

/// Mean-mode latent encodings of a trajectory's observations.
inline std::vector<Vector> encode_path(const Trajectory& traj, const ModelParams& p,
                                       const ModelConfig& cfg) {
  std::vector<Vector> zs;
  zs.reserve(traj.length());
  for (std::size_t t = 0; t < traj.length(); ++t)
    zs.push_back(encode(traj.obs.row(t), p, cfg).mean);
  return zs;
}

/// For each variant and noise level: roll out, then measure the discrete
/// Frechet distance from the rollout's latent path to the nearest training
/// trajectory's latent path (under the same encoder). Mean over episodes.
/// Observation noise is scaled by the training obs std; process noise by the
/// training action std.
inline std::vector<SweepRow> frechet_noise_sweep(const std::vector<VariantModel>& variants,
                                                 const HybridTaskSpec& spec, NoiseKind kind,
                                                 const std::vector<double>& scales,
                                                 std::size_t episodes, std::uint64_t seed,
                                                 const std::vector<Trajectory>& train_data) {
  if (variants.empty()) throw ContractError("frechet_noise_sweep: no variants");
  if (scales.empty()) throw ContractError("frechet_noise_sweep: no scales");
  if (episodes < 1) throw ContractError("frechet_noise_sweep: episodes must be >= 1");
  Vector obs_std = dataset_obs_std(train_data);
  Vector act_std = dataset_action_std(train_data);
  double proc_unit = 0.0;
  for (double s : act_std) proc_unit += s;
  proc_unit /= static_cast<double>(act_std.size());

  std::vector<SweepRow> rows;
  Rng base(seed);
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const VariantModel& vm = variants[vi];
    std::vector<std::vector<Vector>> reference;
    reference.reserve(train_data.size());
    for (const auto& traj : train_data)
      reference.push_back(encode_path(traj, vm.params, vm.config));

    for (std::size_t si = 0; si < scales.size(); ++si) {
      double total = 0.0;
      std::size_t counted = 0;
      for (std::size_t e = 0; e < episodes; ++e) {
        RolloutOptions opts;
        opts.mode = RolloutMode::kMean;
        opts.seed = base.substream((vi * scales.size() + si) * episodes + e).seed();
        if (kind == NoiseKind::kObservation) {
          opts.obs_noise_scale = scales[si];
          opts.obs_noise_std = obs_std;
        } else {
          opts.proc_noise_std = scales[si] * proc_unit;
        }
        RolloutResult r = rollout(vm.params, vm.config, spec, opts);
        if (r.latents.empty()) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& ref : reference)
          best = std::min(best, frechet_distance(r.latents, ref));
        total += best;
        ++counted;
      }
      SweepRow row;
      row.variant = vm.name;
      row.noise_kind = noise_kind_name(kind);
      row.scale = scales[si];
      row.distance = counted > 0 ? total / static_cast<double>(counted) : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace slfc
