#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slfc/core/distributions.hpp"
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

/// Vanilla mixture density network over actions: trunk features feed a
/// weight head plus per-component mean and log-variance heads.
struct MdnConfig {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::size_t num_components = 0;
  std::vector<std::size_t> hidden{64, 64};
  double var_floor = 1e-5;

  void validate() const {
    if (obs_dim < 1 || action_dim < 1 || num_components < 1)
      throw ConfigError("MdnConfig: dims and num_components must be >= 1");
    if (!(var_floor > 0.0)) throw ConfigError("MdnConfig: var_floor must be > 0");
    for (std::size_t w : hidden)
      if (w < 1) throw ConfigError("MdnConfig: hidden widths must be >= 1");
  }
};

struct MdnParams {
  MlpTrunk trunk;
  Matrix w_pi, b_pi;          // h -> C
  Matrix w_mu, b_mu;          // h -> C*A
  Matrix w_logvar, b_logvar;  // h -> C*A

  template <typename Self, typename F>
  static void visit_impl(Self& p, F&& f) {
    for (std::size_t l = 0; l < p.trunk.weights.size(); ++l) {
      f("trunk.w" + std::to_string(l), p.trunk.weights[l]);
      f("trunk.b" + std::to_string(l), p.trunk.biases[l]);
    }
    f("pi_w", p.w_pi);
    f("pi_b", p.b_pi);
    f("mu_w", p.w_mu);
    f("mu_b", p.b_mu);
    f("logvar_w", p.w_logvar);
    f("logvar_b", p.b_logvar);
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

inline MdnParams init_mdn_params(const MdnConfig& cfg, Rng& rng) {
  cfg.validate();
  MdnParams p;
  p.trunk = detail::make_trunk(cfg.obs_dim, cfg.hidden, rng);
  std::size_t h = detail::trunk_out_dim(p.trunk, cfg.obs_dim);
  const std::size_t C = cfg.num_components, A = cfg.action_dim;
  double s = 1.0 / std::sqrt(static_cast<double>(h));
  p.w_pi = Matrix(C, h);
  p.b_pi = Matrix(1, C);
  p.w_mu = Matrix(C * A, h);
  // random means break the component symmetry at initialization
  for (std::size_t i = 0; i < p.w_mu.size(); ++i) p.w_mu.data()[i] = rng.uniform(-s, s);
  p.b_mu = Matrix(1, C * A);
  p.w_logvar = Matrix(C * A, h);
  p.b_logvar = Matrix(1, C * A);
  return p;
}

struct MdnEval {
  CategoricalDist weights;
  std::vector<DiagGaussian> components;
};

inline MdnEval mdn_eval(const Vector& o, const MdnParams& p, const MdnConfig& cfg) {
  if (o.size() != cfg.obs_dim) throw ShapeError("mdn_eval: obs length mismatch");
  Vector h = detail::trunk_forward(p.trunk, o);
  CategoricalDist weights = log_softmax(detail::head_forward(p.w_pi, p.b_pi, h));
  Vector mu = detail::head_forward(p.w_mu, p.b_mu, h);
  Vector lv = detail::head_forward(p.w_logvar, p.b_logvar, h);
  std::vector<DiagGaussian> comps;
  const std::size_t C = cfg.num_components, A = cfg.action_dim;
  comps.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    Vector mean(A), var(A);
    for (std::size_t i = 0; i < A; ++i) {
      mean[i] = mu[c * A + i];
      var[i] = std::exp(lv[c * A + i]) + cfg.var_floor;
    }
    comps.emplace_back(std::move(mean), std::move(var));
  }
  return MdnEval{std::move(weights), std::move(comps)};
}

/// Negative mixture log-likelihood via logsumexp.
inline double mdn_loss(const Vector& o, const Vector& u, const MdnParams& p,
                       const MdnConfig& cfg) {
  if (u.size() != cfg.action_dim) throw ShapeError("mdn_loss: action length mismatch");
  MdnEval e = mdn_eval(o, p, cfg);
  Vector joint(cfg.num_components);
  for (std::size_t c = 0; c < cfg.num_components; ++c)
    joint[c] = e.weights.log_probs[c] + mvn_logpdf_diag(u, e.components[c]);
  return -logsumexp(joint);
}

struct MdnAction {
  Vector action;
  std::size_t component = 0;  // 1-based
};

/// mode mean: argmax-weight component's mean (ties to the lowest index);
/// mode sample: draw a component from the weights, then a Gaussian sample.
inline MdnAction mdn_act(const Vector& o, const MdnParams& p, const MdnConfig& cfg,
                         bool sample, Rng* rng = nullptr) {
  MdnEval e = mdn_eval(o, p, cfg);
  MdnAction out;
  if (!sample) {
    out.component = e.weights.argmax() + 1;
    out.action = e.components[out.component - 1].mean;
    return out;
  }
  if (!rng) throw ContractError("mdn_act: sampling requires an rng");
  double r = rng->uniform();
  double acc = 0.0;
  std::size_t c = cfg.num_components - 1;
  for (std::size_t k = 0; k < cfg.num_components; ++k) {
    acc += std::exp(e.weights.log_probs[k]);
    if (r < acc) {
      c = k;
      break;
    }
  }
  out.component = c + 1;
  const DiagGaussian& comp = e.components[c];
  out.action = Vector(comp.dim());
  for (std::size_t i = 0; i < comp.dim(); ++i)
    out.action[i] = comp.mean[i] + std::sqrt(comp.var[i]) * rng->normal();
  return out;
}

/// Batched negative log-likelihood graph.
inline Tape::NodeId build_mdn_graph(Tape& t, const detail::BoundParams& bp,
                                    const MdnConfig& cfg, const Matrix& obs,
                                    const Matrix& act) {
  const std::size_t C = cfg.num_components, A = cfg.action_dim;
  Tape::NodeId x = t.constant(obs);
  Tape::NodeId h = detail::trunk_graph(t, bp, "trunk", x);
  Tape::NodeId logits = t.add_row(t.matmul_nt(h, bp.at("pi_w")), bp.at("pi_b"));
  Tape::NodeId log_pi = t.sub_col(logits, t.row_logsumexp(logits));
  Tape::NodeId mu = t.add_row(t.matmul_nt(h, bp.at("mu_w")), bp.at("mu_b"));
  Tape::NodeId lv = t.add_row(t.matmul_nt(h, bp.at("logvar_w")), bp.at("logvar_b"));
  std::vector<Tape::NodeId> lls;
  lls.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    Tape::NodeId mean_c = t.slice_cols(mu, c * A, (c + 1) * A);
    Tape::NodeId var_c = t.add_scalar(t.exp(t.slice_cols(lv, c * A, (c + 1) * A)),
                                      cfg.var_floor);
    lls.push_back(t.gauss_row_logpdf(act, mean_c, var_c));
  }
  Tape::NodeId joint = t.add(t.concat_cols(lls), log_pi);
  return t.neg(t.mean_all(t.row_logsumexp(joint)));
}

struct MdnFitResult {
  MdnParams params;
  std::vector<double> epoch_loss;
};

inline MdnFitResult mdn_fit(const PairDataset& data, const MdnConfig& cfg,
                            const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (data.size() == 0) throw ConfigError("mdn_fit: dataset is empty");
  if (data.obs.cols() != cfg.obs_dim || data.actions.cols() != cfg.action_dim)
    throw ConfigError("mdn_fit: dataset dims do not match config");
  Rng rng(tcfg.seed);
  MdnFitResult out;
  out.params = init_mdn_params(cfg, rng);
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
      Tape::NodeId loss = build_mdn_graph(t, bp, cfg, batch.obs, batch.actions);
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
