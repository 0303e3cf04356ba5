#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "slfc/core/distributions.hpp"
#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/core/tape.hpp"
#include "slfc/model/config.hpp"
#include "slfc/model/params.hpp"

namespace slfc {

/// The four per-timestep objective terms, individually exposed.
/// total = recon_obs + recon_act - kl_z - kl_switch holds exactly as stored.
struct ElboBreakdown {
  double recon_obs = 0.0;
  double recon_act = 0.0;
  double kl_z = 0.0;
  double kl_switch = 0.0;
  double total = 0.0;

  static ElboBreakdown assemble(double ro, double ra, double kz, double ks) {
    return ElboBreakdown{ro, ra, kz, ks, ro + ra - kz - ks};
  }
};

/// Per-term weights for ablation assembly; the faithful bound is all ones.
struct LossWeights {
  double w_obs = 1.0;
  double w_act = 1.0;
  double w_klz = 1.0;
  double w_klswitch = 1.0;

  void validate() const {
    if (w_obs < 0 || w_act < 0 || w_klz < 0 || w_klswitch < 0)
      throw ContractError("LossWeights: weights must be nonnegative");
  }

  static LossWeights for_variant(ModelVariant v) {
    LossWeights w;
    if (v != ModelVariant::kMdnFbSw) w.w_klswitch = 0.0;
    return w;
  }
};

/// One (o, u) minibatch in row-major layout.
struct Batch {
  Matrix obs;      // [B x O]
  Matrix actions;  // [B x A]

  std::size_t size() const { return obs.rows(); }
};

namespace detail {

/// A parameter struct bound to a tape as gradient leaves, addressable by the
/// same names visit() produces.
class BoundParams {
 public:
  template <typename Visitable>
  BoundParams(Tape& tape, const Visitable& p) {
    p.visit([&](const std::string& name, const Matrix& m) {
      ids_.emplace_back(name, tape.leaf(m));
    });
  }

  Tape::NodeId at(const std::string& name) const {
    for (const auto& [n, id] : ids_)
      if (n == name) return id;
    throw ContractError("BoundParams: unknown parameter '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& [n, id] : ids_)
      if (n == name) return true;
    return false;
  }

  const std::vector<std::pair<std::string, Tape::NodeId>>& ordered() const { return ids_; }

 private:
  std::vector<std::pair<std::string, Tape::NodeId>> ids_;
};

inline Tape::NodeId trunk_graph(Tape& t, const BoundParams& bp, const std::string& prefix,
                                Tape::NodeId x) {
  for (std::size_t l = 0; bp.has(prefix + ".w" + std::to_string(l)); ++l) {
    Tape::NodeId lin = t.matmul_nt(x, bp.at(prefix + ".w" + std::to_string(l)));
    x = t.tanh(t.add_row(lin, bp.at(prefix + ".b" + std::to_string(l))));
  }
  return x;
}

inline Tape::NodeId head_graph(Tape& t, const BoundParams& bp, Tape::NodeId h,
                               const std::string& w, const std::string& b) {
  return t.add_row(t.matmul_nt(h, bp.at(w)), bp.at(b));
}

/// Broadcast a [1 x n] row node to [rows x n].
inline Tape::NodeId tile_rows(Tape& t, Tape::NodeId row, std::size_t rows) {
  const Matrix& r = t.value(row);
  return t.mul_row(t.constant(Matrix(rows, r.cols(), 1.0)), row);
}

}  // namespace detail

/// Node handles of a batched objective graph.
struct ElboGraph {
  Tape::NodeId z;           // [B x S]
  Tape::NodeId recon_obs;   // [B x 1]
  Tape::NodeId recon_act;   // [B x 1]
  Tape::NodeId kl_z;        // [B x 1]
  Tape::NodeId kl_switch;   // [B x 1]
  Tape::NodeId mixture;     // [B x 1] log p(u|z)
  Tape::NodeId log_prior;   // [B x C]
  Tape::NodeId log_post;    // [B x C]
  Tape::NodeId loss;        // [1 x 1] = -mean(weighted per-pair total)
};

/// Builds the per-pair objective for a whole batch. One reparameterization
/// draw per pair (the given noise row). The skill posterior is the analytic
/// Bayes update; no sampling over the categorical happens anywhere.
inline ElboGraph build_elbo_graph(Tape& t, const detail::BoundParams& bp,
                                  const ModelConfig& cfg, const Matrix& obs,
                                  const Matrix& act, const Matrix& noise,
                                  const LossWeights& w) {
  const std::size_t B = obs.rows(), A = cfg.action_dim, C = cfg.num_skills;
  if (act.rows() != B || noise.rows() != B)
    throw ShapeError("build_elbo_graph: batch row counts differ");
  if (obs.cols() != cfg.obs_dim || act.cols() != A || noise.cols() != cfg.latent_dim)
    throw ShapeError("build_elbo_graph: column dims disagree with config");
  w.validate();

  ElboGraph g;
  Tape::NodeId x = t.constant(obs);

  // Encoder q(z|o) and the reparameterized sample.
  Tape::NodeId h = detail::trunk_graph(t, bp, "encoder", x);
  Tape::NodeId mu = detail::head_graph(t, bp, h, "encoder.mean_w", "encoder.mean_b");
  Tape::NodeId var =
      t.add_scalar(t.softplus(detail::head_graph(t, bp, h, "encoder.var_w", "encoder.var_b")),
                   cfg.var_floor);
  g.z = t.add(mu, t.mul(t.sqrt(var), t.constant(noise)));

  // Observation reconstruction under the shared decoder variance.
  Tape::NodeId hd = detail::trunk_graph(t, bp, "decoder", g.z);
  Tape::NodeId dec_mean = detail::head_graph(t, bp, hd, "decoder.out_w", "decoder.out_b");
  Tape::NodeId dec_var =
      t.add_scalar(t.exp(bp.at("decoder.log_var")), cfg.var_floor);
  g.recon_obs = t.gauss_row_logpdf(obs, dec_mean, detail::tile_rows(t, dec_var, B));

  // Switcher prior over skills and the per-skill action-noise head.
  Tape::NodeId hs = detail::trunk_graph(t, bp, "switcher", g.z);
  Tape::NodeId logits = detail::head_graph(t, bp, hs, "switcher.logits_w", "switcher.logits_b");
  g.log_prior = t.sub_col(logits, t.row_logsumexp(logits));
  Tape::NodeId noise_raw = detail::head_graph(t, bp, hs, "noise_head.w", "noise_head.b");

  // Per-skill action log-likelihoods.
  std::vector<Tape::NodeId> lls;
  lls.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    Tape::NodeId var_c =
        t.add_scalar(t.exp(t.slice_cols(noise_raw, c * A, (c + 1) * A)), cfg.var_floor);
    Tape::NodeId mean_c;
    if (cfg.feedback_structure) {
      Tape::NodeId err = t.rsub_row(g.z, t.slice_rows(bp.at("goal_bank"), c, c + 1));
      mean_c = t.matmul_nt(err, t.slice_rows(bp.at("gain_bank"), c * A, (c + 1) * A));
    } else {
      mean_c = t.add_row(
          t.matmul_nt(g.z, t.slice_rows(bp.at("free_mean_w"), c * A, (c + 1) * A)),
          t.slice_rows(bp.at("free_mean_b"), c, c + 1));
    }
    lls.push_back(t.gauss_row_logpdf(act, mean_c, var_c));
  }
  Tape::NodeId ll = t.concat_cols(lls);

  // Analytic posterior over skills and the two action-side terms. With the
  // switching KL ablated, the posterior is replaced by the prior: the action
  // term becomes the prior-weighted likelihood and the KL vanishes
  // identically, which also trains the switcher through the action term.
  Tape::NodeId joint = t.add(ll, g.log_prior);
  g.mixture = t.row_logsumexp(joint);
  g.log_post = t.sub_col(joint, g.mixture);
  if (cfg.switch_kl) {
    Tape::NodeId post = t.exp(g.log_post);
    g.recon_act = t.row_sum(t.mul(post, ll));
    g.kl_switch = t.row_sum(t.mul(post, t.sub(g.log_post, g.log_prior)));
  } else {
    g.recon_act = t.row_sum(t.mul(t.exp(g.log_prior), ll));
    g.kl_switch = t.constant(Matrix(B, 1, 0.0));
  }

  // Closed-form KL(q(z|o) || p(z)).
  Tape::NodeId prior_var = t.add_scalar(t.exp(bp.at("prior_log_var")), cfg.var_floor);
  Tape::NodeId log_ratio = t.rsub_row(t.log(var), t.log(prior_var));
  Tape::NodeId diff = t.sub_row(mu, bp.at("prior_mean"));
  Tape::NodeId frac = t.div_row(t.add(var, t.square(diff)), prior_var);
  g.kl_z = t.row_sum(t.scale(t.add_scalar(t.add(log_ratio, frac), -1.0), 0.5));

  // Weighted loss = -mean of per-pair weighted totals.
  Tape::NodeId weighted = t.add(t.scale(g.recon_obs, w.w_obs), t.scale(g.recon_act, w.w_act));
  weighted = t.sub(weighted, t.scale(g.kl_z, w.w_klz));
  weighted = t.sub(weighted, t.scale(g.kl_switch, w.w_klswitch));
  g.loss = t.neg(t.mean_all(weighted));
  return g;
}

namespace detail {

inline double column_mean(const Matrix& col) {
  double acc = 0.0;
  for (std::size_t i = 0; i < col.rows(); ++i) acc += col(i, 0);
  return acc / static_cast<double>(col.rows());
}

inline void check_posterior_defined(const Tape& t, const ElboGraph& g) {
  const Matrix& mix = t.value(g.mixture);
  for (std::size_t i = 0; i < mix.rows(); ++i)
    if (!std::isfinite(mix(i, 0)))
      throw DegenerateInputError("elbo: all skill components at -inf likelihood");
}

}  // namespace detail

/// Objective terms for a single (o, u) pair with a caller-supplied
/// reparameterization draw.
inline ElboBreakdown elbo_step(const Vector& o, const Vector& u, const ModelParams& p,
                               const ModelConfig& cfg, const Vector& noise) {
  Tape t;
  detail::BoundParams bp(t, p);
  ElboGraph g = build_elbo_graph(t, bp, cfg, Matrix::row_vector(o), Matrix::row_vector(u),
                                 Matrix::row_vector(noise), LossWeights{});
  detail::check_posterior_defined(t, g);
  return ElboBreakdown::assemble(t.value(g.recon_obs)(0, 0), t.value(g.recon_act)(0, 0),
                                 t.value(g.kl_z)(0, 0), t.value(g.kl_switch)(0, 0));
}

/// Eq.-15-style split of the switching KL: returns (H(q,p), H(q)) with
/// H(q,p) - H(q) = kl_categorical(q,p) exactly.
inline std::pair<double, double> switch_kl_decomposition(const CategoricalDist& q,
                                                         const CategoricalDist& p) {
  if (q.size() != p.size()) throw ShapeError("switch_kl_decomposition: size mismatch");
  double cross = 0.0, ent = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    double qc = std::exp(q.log_probs[c]);
    if (qc == 0.0) continue;
    cross -= qc * p.log_probs[c];
    ent -= qc * q.log_probs[c];
  }
  return {cross, ent};
}

struct BatchElbo {
  double loss = 0.0;
  ElboBreakdown mean;
};

/// Value-only evaluation with explicit noise (one row per pair). This is the
/// path finite-difference oracles probe.
inline BatchElbo batch_elbo_value(const Batch& batch, const ModelParams& p,
                                  const ModelConfig& cfg, const LossWeights& w,
                                  const Matrix& noise) {
  if (batch.size() == 0) throw ContractError("batch_elbo: empty batch");
  Tape t;
  detail::BoundParams bp(t, p);
  ElboGraph g = build_elbo_graph(t, bp, cfg, batch.obs, batch.actions, noise, w);
  detail::check_posterior_defined(t, g);
  BatchElbo out;
  out.loss = t.scalar_value(g.loss);
  out.mean = ElboBreakdown::assemble(
      detail::column_mean(t.value(g.recon_obs)), detail::column_mean(t.value(g.recon_act)),
      detail::column_mean(t.value(g.kl_z)), detail::column_mean(t.value(g.kl_switch)));
  return out;
}

/// Loss, mean terms and parameter gradients in visit() order.
inline BatchElbo batch_elbo_grad(const Batch& batch, const ModelParams& p,
                                 const ModelConfig& cfg, const LossWeights& w,
                                 const Matrix& noise,
                                 std::vector<std::pair<std::string, Matrix>>& grads) {
  if (batch.size() == 0) throw ContractError("batch_elbo: empty batch");
  Tape t;
  detail::BoundParams bp(t, p);
  ElboGraph g = build_elbo_graph(t, bp, cfg, batch.obs, batch.actions, noise, w);
  detail::check_posterior_defined(t, g);
  BatchElbo out;
  out.loss = t.scalar_value(g.loss);
  out.mean = ElboBreakdown::assemble(
      detail::column_mean(t.value(g.recon_obs)), detail::column_mean(t.value(g.recon_act)),
      detail::column_mean(t.value(g.kl_z)), detail::column_mean(t.value(g.kl_switch)));
  std::vector<Matrix> adj = t.backward(g.loss);
  grads.clear();
  grads.reserve(bp.ordered().size());
  for (const auto& [name, id] : bp.ordered()) grads.emplace_back(name, std::move(adj[id]));
  return out;
}

/// Spec surface: noise drawn from the rng, one latent row per pair, in batch
/// order. Deterministic given the rng state.
inline BatchElbo batch_loss(const Batch& batch, const ModelParams& p, const ModelConfig& cfg,
                            const LossWeights& w, Rng& rng) {
  if (batch.size() == 0) throw ContractError("batch_loss: empty batch");
  Matrix noise(batch.size(), cfg.latent_dim);
  for (std::size_t i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  return batch_elbo_value(batch, p, cfg, w, noise);
}

}  // namespace slfc
