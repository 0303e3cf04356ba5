#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <thread>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/eval/assignment.hpp"
#include "slfc/sim/rollout.hpp"
#include "slfc/sim/task.hpp"

namespace slfc {

inline double success_rate(const std::vector<RolloutResult>& results) {
  if (results.empty()) throw ContractError("success_rate: no results");
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

struct RobustnessCurve {
  std::vector<double> noise_scales;
  std::vector<double> success_rates;
  double auc = 0.0;
};

/// Normalized trapezoid area of a rate-vs-scale curve; a single point uses
/// the degenerate-range convention auc = rate.
inline double trapezoid_auc(const std::vector<double>& scales,
                            const std::vector<double>& rates) {
  if (scales.size() != rates.size() || scales.empty())
    throw ContractError("trapezoid_auc: bad curve");
  if (scales.size() == 1) return rates[0];
  double area = 0.0;
  for (std::size_t i = 1; i < scales.size(); ++i) {
    double dx = scales[i] - scales[i - 1];
    if (dx <= 0.0) throw ContractError("trapezoid_auc: scales must be strictly increasing");
    area += 0.5 * (rates[i] + rates[i - 1]) * dx;
  }
  return area / (scales.back() - scales.front());
}

/// Success rate under observation noise applied before every encoding,
/// swept over noise scales (in units of the training-data std).
inline RobustnessCurve robustness_curve(const ModelParams& params, const ModelConfig& cfg,
                                        const HybridTaskSpec& spec,
                                        const std::vector<double>& scales,
                                        std::size_t episodes, std::uint64_t seed,
                                        const Vector& train_std,
                                        RolloutMode mode = RolloutMode::kMean,
                                        std::size_t threads = 1) {
  if (scales.empty()) throw ContractError("robustness_curve: no scales");
  if (episodes < 1) throw ContractError("robustness_curve: episodes must be >= 1");
  for (std::size_t i = 1; i < scales.size(); ++i)
    if (scales[i] <= scales[i - 1])
      throw ContractError("robustness_curve: scales must be strictly increasing");

  Rng base(seed);
  RobustnessCurve curve;
  curve.noise_scales = scales;
  threads = std::max<std::size_t>(1, threads);

  for (std::size_t si = 0; si < scales.size(); ++si) {
    std::vector<char> ok(episodes, 0);
    auto run_range = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t e = lo; e < hi; ++e) {
        RolloutOptions opts;
        opts.mode = mode;
        opts.seed = base.substream(si * episodes + e).seed();
        opts.obs_noise_scale = scales[si];
        opts.obs_noise_std = train_std;
        try {
          ok[e] = rollout(params, cfg, spec, opts).success ? 1 : 0;
        } catch (const std::exception&) {
          ok[e] = 0;  // propagated rollout errors count as failures
        }
      }
    };
    if (threads == 1) {
      run_range(0, episodes);
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (episodes + threads - 1) / threads;
      for (std::size_t k = 0; k < threads; ++k) {
        std::size_t lo = k * chunk, hi = std::min(episodes, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(run_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
    std::size_t hits = 0;
    for (char c : ok) hits += c;
    curve.success_rates.push_back(static_cast<double>(hits) /
                                  static_cast<double>(episodes));
  }
  curve.auc = trapezoid_auc(curve.noise_scales, curve.success_rates);
  return curve;
}

struct SkillStats {
  std::size_t num_used_skills = 0;
  double avg_skill_duration = 0.0;     // mean over runs of run/T, averaged over sequences
  double avg_transition_fraction = 0.0;  // complement of the duration fraction
};

/// Run-length statistics over 1-based skill index sequences.
inline SkillStats skill_stats(const std::vector<std::vector<int>>& sequences,
                              std::size_t num_skills) {
  if (sequences.empty()) throw ContractError("skill_stats: no sequences");
  std::set<int> used;
  double duration_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& seq : sequences) {
    if (seq.empty()) throw ContractError("skill_stats: empty sequence");
    for (int s : seq) {
      if (s < 1 || static_cast<std::size_t>(s) > num_skills)
        throw ContractError("skill_stats: skill index out of [1, C]");
      used.insert(s);
    }
    std::size_t runs = 1;
    for (std::size_t t = 1; t < seq.size(); ++t)
      if (seq[t] != seq[t - 1]) ++runs;
    // mean over maximal runs of (run length / T) = 1 / number of runs
    duration_sum += 1.0 / static_cast<double>(runs);
    ++counted;
  }
  SkillStats st;
  st.num_used_skills = used.size();
  st.avg_skill_duration = duration_sum / static_cast<double>(counted);
  st.avg_transition_fraction = 1.0 - st.avg_skill_duration;
  return st;
}

/// Best per-step agreement over injective relabelings of predictions onto
/// ground-truth skills (Hungarian matching on the co-occurrence matrix).
inline double segmentation_accuracy(const std::vector<int>& predicted,
                                    const std::vector<int>& truth, std::size_t C,
                                    std::size_t K) {
  if (predicted.size() != truth.size())
    throw ShapeError("segmentation_accuracy: length mismatch");
  if (predicted.empty()) throw ContractError("segmentation_accuracy: empty sequences");
  const std::size_t n = std::max(C, K);
  Matrix counts(n, n, 0.0);
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    int p = predicted[t], g = truth[t];
    if (p < 1 || static_cast<std::size_t>(p) > C)
      throw ContractError("segmentation_accuracy: prediction out of [1, C]");
    if (g < 1 || static_cast<std::size_t>(g) > K)
      throw ContractError("segmentation_accuracy: truth label out of [1, K]");
    counts(p - 1, g - 1) += 1.0;
  }
  // maximize agreement = minimize negated counts on the padded square
  Matrix cost(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = -counts(i, j);
  std::vector<std::size_t> match = hungarian_min_assignment(cost);
  double agree = 0.0;
  for (std::size_t i = 0; i < n; ++i) agree += counts(i, match[i]);
  return agree / static_cast<double>(predicted.size());
}

/// Concatenated variant over matched sequences (one matching for the lot).
inline double segmentation_accuracy(const std::vector<std::vector<int>>& predicted,
                                    const std::vector<std::vector<int>>& truth,
                                    std::size_t C, std::size_t K) {
  if (predicted.size() != truth.size())
    throw ShapeError("segmentation_accuracy: sequence count mismatch");
  std::vector<int> pcat, tcat;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != truth[i].size())
      throw ShapeError("segmentation_accuracy: length mismatch");
    pcat.insert(pcat.end(), predicted[i].begin(), predicted[i].end());
    tcat.insert(tcat.end(), truth[i].begin(), truth[i].end());
  }
  return segmentation_accuracy(pcat, tcat, C, K);
}

}  // namespace slfc
