#pragma once

#include <cmath>

#include "slfc/core/distributions.hpp"
#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/model/config.hpp"
#include "slfc/model/params.hpp"

namespace slfc {

struct LatentState {
  Vector z;
};

namespace detail {

inline Vector trunk_forward(const MlpTrunk& t, Vector x) {
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    Vector y = matvec(t.weights[l], x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i] + t.biases[l](0, i));
    x = std::move(y);
  }
  return x;
}

inline Vector head_forward(const Matrix& w, const Matrix& b, const Vector& h) {
  Vector y = matvec(w, h);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b(0, i);
  return y;
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

/// q(z | o): tanh MLP emitting mean and softplus(raw) + floor variance.
inline DiagGaussian encode(const Vector& o, const ModelParams& p, const ModelConfig& cfg) {
  if (o.size() != cfg.obs_dim) throw ShapeError("encode: observation length != obs_dim");
  Vector h = detail::trunk_forward(p.encoder_trunk, o);
  Vector mean = detail::head_forward(p.enc_mean_w, p.enc_mean_b, h);
  Vector var = detail::head_forward(p.enc_var_w, p.enc_var_b, h);
  for (auto& v : var) v = detail::softplus(v) + cfg.var_floor;
  return DiagGaussian(std::move(mean), std::move(var));
}

/// z = mean + sqrt(var) * noise, the differentiable sampling path.
inline LatentState reparam_sample(const DiagGaussian& g, const Vector& noise) {
  if (noise.size() != g.dim()) throw ShapeError("reparam_sample: noise length mismatch");
  Vector z(g.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = g.mean[i] + std::sqrt(g.var[i]) * noise[i];
  return LatentState{std::move(z)};
}

/// p(o | z): decoder mean with a shared, z-independent stored variance.
inline DiagGaussian decode(const Vector& z, const ModelParams& p, const ModelConfig& cfg) {
  if (z.size() != cfg.latent_dim) throw ShapeError("decode: latent length != latent_dim");
  Vector h = detail::trunk_forward(p.decoder_trunk, z);
  Vector mean = detail::head_forward(p.dec_out_w, p.dec_out_b, h);
  Vector var(cfg.obs_dim);
  for (std::size_t i = 0; i < var.size(); ++i)
    var[i] = std::exp(p.dec_log_var(0, i)) + cfg.var_floor;
  return DiagGaussian(std::move(mean), std::move(var));
}

/// p(delta | z) = Categorical(log_softmax(switcher(z))).
inline CategoricalDist switch_prior(const Vector& z, const ModelParams& p,
                                    const ModelConfig& cfg) {
  if (z.size() != cfg.latent_dim) throw ShapeError("switch_prior: latent length mismatch");
  Vector h = detail::trunk_forward(p.switcher_trunk, z);
  return log_softmax(detail::head_forward(p.switch_w, p.switch_b, h));
}

/// p(u | delta = skill, z) for a 1-based skill index. With the feedback
/// structure on, the mean is the control law K_c (g_c - z); the plain-mixture
/// ablation uses an unconstrained per-skill affine map instead. Variance
/// comes from the action-noise head on the switcher trunk.
inline DiagGaussian policy(const Vector& z, std::size_t skill, const ModelParams& p,
                           const ModelConfig& cfg) {
  if (z.size() != cfg.latent_dim) throw ShapeError("policy: latent length mismatch");
  if (skill < 1 || skill > cfg.num_skills) throw IndexError("policy: skill index out of range");
  const std::size_t c = skill - 1, A = cfg.action_dim, S = cfg.latent_dim;
  Vector mean(A, 0.0);
  if (cfg.feedback_structure) {
    for (std::size_t i = 0; i < A; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < S; ++j)
        acc += p.gain_bank(c * A + i, j) * (p.goal_bank(c, j) - z[j]);
      mean[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < A; ++i) {
      double acc = p.free_mean_b(c, i);
      for (std::size_t j = 0; j < S; ++j) acc += p.free_mean_w(c * A + i, j) * z[j];
      mean[i] = acc;
    }
  }
  Vector h = detail::trunk_forward(p.switcher_trunk, z);
  Vector raw = detail::head_forward(p.noise_w, p.noise_b, h);
  Vector var(A);
  for (std::size_t i = 0; i < A; ++i) var[i] = std::exp(raw[c * A + i]) + cfg.var_floor;
  return DiagGaussian(std::move(mean), std::move(var));
}

/// q(delta = c | z, u):  prior-weighted per-skill action likelihoods,
/// normalized in log space.
inline CategoricalDist posterior_skill(const Vector& z, const Vector& u,
                                       const ModelParams& p, const ModelConfig& cfg) {
  CategoricalDist prior = switch_prior(z, p, cfg);
  Vector joint(cfg.num_skills);
  for (std::size_t c = 1; c <= cfg.num_skills; ++c)
    joint[c - 1] = prior.log_probs[c - 1] + mvn_logpdf_diag(u, policy(z, c, p, cfg));
  double lse = logsumexp(joint);
  if (!std::isfinite(lse))
    throw DegenerateInputError("posterior_skill: all components at -inf likelihood");
  for (auto& x : joint) x -= lse;
  return CategoricalDist(std::move(joint));
}

/// log p(u | z) = log sum_c pi_c(z) N(u; mean_c, var_c).
inline double mixture_action_density(const Vector& z, const Vector& u,
                                     const ModelParams& p, const ModelConfig& cfg) {
  CategoricalDist prior = switch_prior(z, p, cfg);
  Vector joint(cfg.num_skills);
  for (std::size_t c = 1; c <= cfg.num_skills; ++c)
    joint[c - 1] = prior.log_probs[c - 1] + mvn_logpdf_diag(u, policy(z, c, p, cfg));
  return logsumexp(joint);
}

}  // namespace slfc
