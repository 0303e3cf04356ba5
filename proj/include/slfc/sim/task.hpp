#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/linalg.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"

namespace slfc {

enum class ObsMapKind { kIdentity, kTanhWarp };

inline std::string obs_map_name(ObsMapKind k) {
  return k == ObsMapKind::kIdentity ? "identity" : "tanh_warp";
}

inline ObsMapKind obs_map_from_name(const std::string& s) {
  if (s == "identity") return ObsMapKind::kIdentity;
  if (s == "tanh_warp") return ObsMapKind::kTanhWarp;
  throw ConfigError("unknown obs_map '" + s + "' (expected identity|tanh_warp)");
}

/// Point-mass task with a fixed schedule of ground-truth feedback skills.
/// Actions displace the state directly (x' = x + u); observations pass
/// through an optional warp and may be stacked over the last obs_stack steps
/// to give the encoder short-horizon context.
struct HybridTaskSpec {
  std::size_t state_dim = 2;
  std::size_t num_true_skills = 3;
  std::vector<Matrix> true_gains;  // each [D x D]
  std::vector<Vector> true_goals;  // each [D]
  double switch_radius = 0.05;
  double process_noise = 0.01;
  double success_radius = 0.1;
  ObsMapKind obs_map = ObsMapKind::kIdentity;
  std::size_t horizon = 60;
  std::size_t obs_stack = 1;
  Vector start_low;
  Vector start_high;
  std::string name = "task";

  std::size_t action_dim() const { return state_dim; }
  std::size_t obs_dim() const { return state_dim * obs_stack; }

  void validate() const {
    if (state_dim < 1 || num_true_skills < 1)
      throw ConfigError("HybridTaskSpec: state_dim and num_true_skills must be >= 1");
    if (true_gains.size() != num_true_skills || true_goals.size() != num_true_skills)
      throw ConfigError("HybridTaskSpec: need one gain and one goal per true skill");
    if (!(switch_radius > 0.0) || !(success_radius > 0.0))
      throw ConfigError("HybridTaskSpec: radii must be positive");
    if (process_noise < 0.0) throw ConfigError("HybridTaskSpec: process_noise < 0");
    if (obs_stack < 1) throw ConfigError("HybridTaskSpec: obs_stack must be >= 1");
    if (start_low.size() != state_dim || start_high.size() != state_dim)
      throw ConfigError("HybridTaskSpec: start box dims must match state_dim");
    for (std::size_t i = 0; i < num_true_skills; ++i) {
      const Matrix& g = true_gains[i];
      if (g.rows() != state_dim || g.cols() != state_dim)
        throw ConfigError("HybridTaskSpec: gain " + std::to_string(i + 1) + " has wrong shape");
      if (true_goals[i].size() != state_dim)
        throw ConfigError("HybridTaskSpec: goal " + std::to_string(i + 1) + " has wrong length");
      // demonstrations contract toward each goal only if rho(I - G_i) < 1
      Matrix closed = Matrix::identity(state_dim);
      for (std::size_t r = 0; r < state_dim; ++r)
        for (std::size_t c = 0; c < state_dim; ++c) closed(r, c) -= g(r, c);
      if (spectral_radius(closed) >= 1.0)
        throw ConfigError("HybridTaskSpec: skill " + std::to_string(i + 1) +
                          " does not converge (spectral radius of I - G >= 1)");
    }
  }
};

inline Vector observe(const HybridTaskSpec& spec, const Vector& x) {
  if (spec.obs_map == ObsMapKind::kIdentity) return x;
  Vector o(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::tanh(x[i]);
  return o;
}

struct EnvStep {
  Vector state;
  Vector obs;  // unstacked
};

/// x' = x + u; o' = map(x').
inline EnvStep env_step(const Vector& x, const Vector& u, const HybridTaskSpec& spec) {
  if (x.size() != spec.state_dim || u.size() != spec.state_dim)
    throw ShapeError("env_step: dimension mismatch");
  EnvStep out;
  out.state = add(x, u);
  out.obs = observe(spec, out.state);
  return out;
}

/// Time-indexed observation/action pairs, optionally with ground-truth
/// skill labels (1-based).
struct Trajectory {
  Matrix obs;                   // [T x obs_dim]
  Matrix actions;               // [T x A]
  std::vector<int> true_skills; // empty when unlabeled
  std::string task_id;

  std::size_t length() const { return obs.rows(); }
};

namespace detail {

/// Rolling window of the most recent raw observations, oldest first.
class ObsStack {
 public:
  ObsStack(const HybridTaskSpec& spec, const Vector& first_obs) : spec_(&spec) {
    for (std::size_t i = 0; i < spec.obs_stack; ++i) buf_.push_back(first_obs);
  }

  void push(const Vector& obs) {
    buf_.push_back(obs);
    buf_.pop_front();
  }

  Vector stacked() const {
    Vector out;
    out.reserve(spec_->obs_dim());
    for (const auto& o : buf_) out.insert(out.end(), o.begin(), o.end());
    return out;
  }

 private:
  const HybridTaskSpec* spec_;
  std::deque<Vector> buf_;
};

}  // namespace detail

/// Demonstrations execute the true skills 1..K* in order: feedback action
/// toward the active goal plus process noise, advancing to the next skill
/// one step after the state enters the switch radius. Bit-identical for a
/// given (spec, n_demos, seed).
inline std::vector<Trajectory> generate_dataset(const HybridTaskSpec& spec,
                                                std::size_t n_demos, std::uint64_t seed) {
  spec.validate();
  if (n_demos < 1) throw ContractError("generate_dataset: n_demos must be >= 1");
  Rng base(seed);
  std::vector<Trajectory> out;
  out.reserve(n_demos);
  const std::size_t d = spec.state_dim;

  for (std::size_t demo = 0; demo < n_demos; ++demo) {
    Rng rng = base.substream(demo);
    Vector x(d);
    for (std::size_t i = 0; i < d; ++i)
      x[i] = rng.uniform(spec.start_low[i], spec.start_high[i]);

    detail::ObsStack stack(spec, observe(spec, x));
    std::vector<Vector> obs_rows, act_rows;
    std::vector<int> labels;
    std::size_t skill = 1;

    for (std::size_t t = 0; t < spec.horizon; ++t) {
      const Matrix& gain = spec.true_gains[skill - 1];
      const Vector& goal = spec.true_goals[skill - 1];
      Vector u = matvec(gain, sub(goal, x));
      for (auto& ui : u) ui += spec.process_noise * rng.normal();

      obs_rows.push_back(stack.stacked());
      act_rows.push_back(u);
      labels.push_back(static_cast<int>(skill));

      x = add(x, u);
      stack.push(observe(spec, x));
      // switch once the landed state is inside the radius, so no skill ever
      // emits a stopping action from within its goal shell
      if (dist2(x, goal) < spec.switch_radius) {
        ++skill;
        if (skill > spec.num_true_skills) break;
      }
    }

    Trajectory traj;
    traj.task_id = spec.name;
    traj.obs = Matrix(obs_rows.size(), spec.obs_dim());
    traj.actions = Matrix(act_rows.size(), spec.action_dim());
    for (std::size_t t = 0; t < obs_rows.size(); ++t) {
      traj.obs.set_row(t, obs_rows[t]);
      traj.actions.set_row(t, act_rows[t]);
    }
    traj.true_skills = std::move(labels);
    out.push_back(std::move(traj));
  }
  return out;
}

/// Per-dimension population standard deviation pooled over every timestep of
/// every trajectory.
inline Vector dataset_obs_std(const std::vector<Trajectory>& data) {
  if (data.empty()) throw ContractError("dataset_obs_std: empty dataset");
  const std::size_t d = data[0].obs.cols();
  Vector sum(d, 0.0), sumsq(d, 0.0);
  std::size_t n = 0;
  for (const auto& traj : data) {
    for (std::size_t t = 0; t < traj.length(); ++t)
      for (std::size_t j = 0; j < d; ++j) {
        double v = traj.obs(t, j);
        sum[j] += v;
        sumsq[j] += v * v;
      }
    n += traj.length();
  }
  Vector std(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = sum[j] / static_cast<double>(n);
    std[j] = std::sqrt(std::max(0.0, sumsq[j] / static_cast<double>(n) - mean * mean));
  }
  return std;
}

inline Vector dataset_action_std(const std::vector<Trajectory>& data) {
  if (data.empty()) throw ContractError("dataset_action_std: empty dataset");
  const std::size_t d = data[0].actions.cols();
  Vector sum(d, 0.0), sumsq(d, 0.0);
  std::size_t n = 0;
  for (const auto& traj : data) {
    for (std::size_t t = 0; t < traj.length(); ++t)
      for (std::size_t j = 0; j < d; ++j) {
        double v = traj.actions(t, j);
        sum[j] += v;
        sumsq[j] += v * v;
      }
    n += traj.length();
  }
  Vector std(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = sum[j] / static_cast<double>(n);
    std[j] = std::sqrt(std::max(0.0, sumsq[j] / static_cast<double>(n) - mean * mean));
  }
  return std;
}

/// Default three-stage push-style task.
inline HybridTaskSpec smoke_task() {
  HybridTaskSpec s;
  s.name = "push";
  s.state_dim = 2;
  s.num_true_skills = 3;
  Matrix g1 = Matrix::identity(2), g2 = Matrix::identity(2), g3 = Matrix::identity(2);
  for (std::size_t i = 0; i < 2; ++i) {
    g1(i, i) = 0.5;
    g2(i, i) = 0.4;
    g3(i, i) = 0.45;
  }
  s.true_gains = {g1, g2, g3};
  s.true_goals = {{1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  s.switch_radius = 0.05;
  s.success_radius = 0.1;
  s.process_noise = 0.01;
  s.horizon = 60;
  s.obs_map = ObsMapKind::kIdentity;
  s.obs_stack = 1;
  s.start_low = {-0.5, -0.5};
  s.start_high = {0.5, 0.5};
  return s;
}

/// Pen-stroke-like task: warped observations, stacked history instead of a
/// recurrent encoder.
inline HybridTaskSpec stroke_task() {
  HybridTaskSpec s;
  s.name = "stroke";
  s.state_dim = 2;
  s.num_true_skills = 4;
  auto gain = [](double k) {
    Matrix g = Matrix::identity(2);
    g(0, 0) = k;
    g(1, 1) = k;
    return g;
  };
  s.true_gains = {gain(0.35), gain(0.4), gain(0.35), gain(0.45)};
  s.true_goals = {{0.8, 0.4}, {0.4, 1.0}, {-0.2, 0.6}, {0.0, 0.0}};
  s.switch_radius = 0.05;
  s.success_radius = 0.12;
  s.process_noise = 0.01;
  s.horizon = 80;
  s.obs_map = ObsMapKind::kTanhWarp;
  s.obs_stack = 4;
  s.start_low = {-0.1, -0.1};
  s.start_high = {0.1, 0.1};
  return s;
}

}  // namespace slfc
