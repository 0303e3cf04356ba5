#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/core/tape.hpp"
#include "slfc/elbo/elbo.hpp"
#include "slfc/model/forward.hpp"
#include "slfc/model/params.hpp"
#include "slfc/train/adam.hpp"
#include "slfc/train/trainer.hpp"

namespace slfc {

/// Behaviour cloning: direct obs -> action regression.
struct BcConfig {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> hidden{256, 256};

  void validate() const {
    if (obs_dim < 1 || action_dim < 1) throw ConfigError("BcConfig: dims must be >= 1");
    for (std::size_t w : hidden)
      if (w < 1) throw ConfigError("BcConfig: hidden widths must be >= 1");
  }
};

struct BcParams {
  MlpTrunk trunk;
  Matrix out_w, out_b;

  template <typename Self, typename F>
  static void visit_impl(Self& p, F&& f) {
    for (std::size_t l = 0; l < p.trunk.weights.size(); ++l) {
      f("trunk.w" + std::to_string(l), p.trunk.weights[l]);
      f("trunk.b" + std::to_string(l), p.trunk.biases[l]);
    }
    f("out_w", p.out_w);
    f("out_b", p.out_b);
  }
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, std::forward<F>(f));
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, std::forward<F>(f));
  }
};

inline BcParams init_bc_params(const BcConfig& cfg, Rng& rng) {
  cfg.validate();
  BcParams p;
  p.trunk = detail::make_trunk(cfg.obs_dim, cfg.hidden, rng);
  std::size_t h = detail::trunk_out_dim(p.trunk, cfg.obs_dim);
  double s = 1.0 / std::sqrt(static_cast<double>(h));
  p.out_w = Matrix(cfg.action_dim, h);
  for (std::size_t i = 0; i < p.out_w.size(); ++i) p.out_w.data()[i] = rng.uniform(-s, s);
  p.out_b = Matrix(1, cfg.action_dim);
  return p;
}

inline Vector bc_act(const Vector& o, const BcParams& p) {
  Vector h = detail::trunk_forward(p.trunk, o);
  return detail::head_forward(p.out_w, p.out_b, h);
}

/// Mean squared error over action dimensions.
inline double bc_loss(const Vector& o, const Vector& u, const BcParams& p) {
  Vector pred = bc_act(o, p);
  if (pred.size() != u.size()) throw ShapeError("bc_loss: action length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double d = pred[i] - u[i];
    acc += d * d;
  }
  return acc / static_cast<double>(u.size());
}

/// Batched loss graph: mean over pairs and dims of the squared error.
inline Tape::NodeId build_bc_graph(Tape& t, const detail::BoundParams& bp,
                                   const Matrix& obs, const Matrix& act) {
  Tape::NodeId x = t.constant(obs);
  Tape::NodeId h = detail::trunk_graph(t, bp, "trunk", x);
  Tape::NodeId pred = t.add_row(t.matmul_nt(h, bp.at("out_w")), bp.at("out_b"));
  return t.mean_all(t.square(t.sub(pred, t.constant(act))));
}

inline double bc_batch_loss(const Batch& b, const BcParams& p) {
  Tape t;
  detail::BoundParams bp(t, p);
  return t.scalar_value(build_bc_graph(t, bp, b.obs, b.actions));
}

struct BcFitResult {
  BcParams params;
  std::vector<double> epoch_loss;
};

inline BcFitResult bc_fit(const PairDataset& data, const BcConfig& cfg,
                          const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (data.size() == 0) throw ConfigError("bc_fit: dataset is empty");
  if (data.obs.cols() != cfg.obs_dim || data.actions.cols() != cfg.action_dim)
    throw ConfigError("bc_fit: dataset dims do not match config");
  Rng rng(tcfg.seed);
  BcFitResult out;
  out.params = init_bc_params(cfg, rng);
  ParamView view = make_view(out.params);
  AdamState adam = AdamState::init(view);
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  NamedGrads grads;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    detail::fisher_yates(idx, rng);
    double sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += tcfg.batch_size) {
      std::size_t end = std::min(begin + tcfg.batch_size, n);
      Batch batch = detail::gather_batch(data, idx, begin, end);
      Tape t;
      detail::BoundParams bp(t, out.params);
      Tape::NodeId loss = build_bc_graph(t, bp, batch.obs, batch.actions);
      std::vector<Matrix> adj = t.backward(loss);
      grads.clear();
      for (const auto& [name, id] : bp.ordered()) grads.emplace_back(name, std::move(adj[id]));
      clip_global_norm(grads, tcfg.grad_clip_norm);
      adam_step(view, grads, adam, tcfg);
      sum += t.scalar_value(loss) * static_cast<double>(end - begin);
    }
    out.epoch_loss.push_back(sum / static_cast<double>(n));
  }
  return out;
}

}  // namespace slfc
