#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // in epochs; 0 disables periodic saves
  std::string checkpoint_path;
  double grad_clip_norm = 10.0;  // 0 disables clipping

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw ConfigError("TrainConfig: betas must lie in [0, 1)");
  }
};

using NamedGrads = std::vector<std::pair<std::string, Matrix>>;

/// Mutable, name-tagged view over a parameter struct's tensors.
struct ParamView {
  std::vector<std::pair<std::string, Matrix*>> tensors;
};

template <typename Params>
ParamView make_view(Params& p) {
  ParamView v;
  p.visit([&](const std::string& name, Matrix& m) { v.tensors.emplace_back(name, &m); });
  return v;
}

struct AdamState {
  NamedGrads m;
  NamedGrads v;
  std::size_t t = 0;

  static AdamState init(const ParamView& view) {
    AdamState s;
    for (const auto& [name, mat] : view.tensors) {
      s.m.emplace_back(name, Matrix(mat->rows(), mat->cols()));
      s.v.emplace_back(name, Matrix(mat->rows(), mat->cols()));
    }
    return s;
  }
};

inline double global_grad_norm(const NamedGrads& grads) {
  double acc = 0.0;
  for (const auto& [name, g] : grads)
    for (std::size_t i = 0; i < g.size(); ++i) acc += g.data()[i] * g.data()[i];
  return std::sqrt(acc);
}

inline void clip_global_norm(NamedGrads& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double n = global_grad_norm(grads);
  if (n <= max_norm) return;
  double s = max_norm / n;
  for (auto& [name, g] : grads)
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= s;
}

/// Standard bias-corrected Adam update. Gradients must align with the view
/// by position and shape. A non-finite gradient or resulting parameter
/// aborts with a diagnostic naming the offending tensor.
inline void adam_step(ParamView& params, const NamedGrads& grads, AdamState& state,
                      const TrainConfig& cfg) {
  if (grads.size() != params.tensors.size())
    throw ShapeError("adam_step: gradient count does not match parameters");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const auto& [gname, g] = grads[k];
    Matrix& theta = *params.tensors[k].second;
    if (!g.same_shape(theta))
      throw ShapeError("adam_step: gradient shape mismatch for " + gname);
    if (!g.all_finite())
      throw NumericalError("adam_step: non-finite gradient in " + gname);
    Matrix& m = state.m[k].second;
    Matrix& v = state.v[k].second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gi = g.data()[i];
      m.data()[i] = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
      v.data()[i] = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      theta.data()[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    if (!theta.all_finite())
      throw NumericalError("adam_step: non-finite parameter after update in " + gname);
  }
}

}  // namespace slfc
