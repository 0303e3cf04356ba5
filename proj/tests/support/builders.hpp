#pragma once

#include <cmath>

#include "slfc/core/distributions.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/elbo/elbo.hpp"
#include "slfc/model/config.hpp"
#include "slfc/model/forward.hpp"
#include "slfc/model/params.hpp"

namespace slfc::test {

/// Fresh random-initialized model.
inline std::pair<ModelConfig, ModelParams> small_model(std::size_t O, std::size_t A,
                                                       std::size_t S, std::size_t C,
                                                       std::uint64_t seed,
                                                       std::vector<std::size_t> hidden = {8}) {
  ModelConfig cfg;
  cfg.obs_dim = O;
  cfg.action_dim = A;
  cfg.latent_dim = S;
  cfg.num_skills = C;
  cfg.encoder_hidden = hidden;
  cfg.decoder_hidden = hidden;
  cfg.switcher_hidden = hidden;
  Rng rng(seed);
  ModelParams p = init_params(cfg, rng);
  return {cfg, p};
}

/// Randomize every head so nothing sits at the zero initialization.
inline void randomize_params(ModelParams& p, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  p.visit([&](const std::string&, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] += scale * rng.normal();
  });
}

/// Brute-force skill posterior straight from the definition, in linear space
/// via the prior and per-skill Gaussian likelihoods.
inline Vector posterior_bruteforce(const Vector& z, const Vector& u, const ModelParams& p,
                                   const ModelConfig& cfg) {
  Vector w(cfg.num_skills);
  CategoricalDist prior = switch_prior(z, p, cfg);
  double total = 0.0;
  for (std::size_t c = 1; c <= cfg.num_skills; ++c) {
    DiagGaussian pol = policy(z, c, p, cfg);
    w[c - 1] = std::exp(prior.log_probs[c - 1]) * std::exp(mvn_logpdf_diag(u, pol));
    total += w[c - 1];
  }
  for (auto& x : w) x /= total;
  return w;
}

/// log p(o, u) by dense trapezoid quadrature over a scalar latent plus the
/// exact sum over skills (inside mixture_action_density).
inline double log_evidence_quadrature(const Vector& o, const Vector& u,
                                      const ModelParams& p, const ModelConfig& cfg,
                                      std::size_t grid = 8001, double half_width = 12.0) {
  double mu = p.prior_mean(0, 0);
  double var = std::exp(p.prior_log_var(0, 0)) + cfg.var_floor;
  double sd = std::sqrt(var);
  double lo = mu - half_width * sd, hi = mu + half_width * sd;
  double dz = (hi - lo) / static_cast<double>(grid - 1);
  DiagGaussian prior_z({mu}, {var});
  Vector terms;
  terms.reserve(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    Vector z{lo + dz * static_cast<double>(i)};
    double lp = mvn_logpdf_diag(z, prior_z);
    lp += mvn_logpdf_diag(o, decode(z, p, cfg));
    lp += mixture_action_density(z, u, p, cfg);
    // trapezoid endpoint halving
    if (i == 0 || i + 1 == grid) lp += std::log(0.5);
    terms.push_back(lp);
  }
  return logsumexp(terms) + std::log(dz);
}

}  // namespace slfc::test
