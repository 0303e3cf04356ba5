#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "slfc/core/matrix.hpp"
#include "slfc/core/rng.hpp"
#include "slfc/model/config.hpp"

namespace slfc {

/// Weights of a plain MLP trunk; layer l maps fan_in -> widths[l] with tanh.
/// Weight matrices are [out x in]; biases are [1 x out] rows.
struct MlpTrunk {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

namespace detail {

inline MlpTrunk make_trunk(std::size_t in_dim, const std::vector<std::size_t>& widths,
                           Rng& rng) {
  MlpTrunk t;
  std::size_t fan_in = in_dim;
  for (std::size_t w : widths) {
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix weight(w, fan_in);
    for (std::size_t i = 0; i < weight.size(); ++i)
      weight.data()[i] = rng.uniform(-s, s);
    t.weights.push_back(std::move(weight));
    t.biases.emplace_back(1, w);
    fan_in = w;
  }
  return t;
}

inline std::size_t trunk_out_dim(const MlpTrunk& t, std::size_t in_dim) {
  return t.weights.empty() ? in_dim : t.weights.back().rows();
}

/// Rows orthonormalized via Gram-Schmidt, then scaled.
inline Matrix scaled_orthonormal_rows(std::size_t rows, std::size_t cols, double scale,
                                      Rng& rng) {
  Matrix m = rng.normal_matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    Vector ri = m.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      Vector rk = m.row(k);
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += ri[j] * rk[j];
      for (std::size_t j = 0; j < cols; ++j) ri[j] -= dot * rk[j];
    }
    double n = norm2(ri);
    if (n > 1e-12)
      for (auto& x : ri) x /= n;
    m.set_row(i, ri);
  }
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] *= scale;
  return m;
}

}  // namespace detail

/// All trainable quantities of the switching latent feedback controller.
///
/// Variance handling: network-raw encoder variances pass through
/// softplus(raw) + var_floor; stored variance parameters (decoder, prior) and
/// the action-noise head are kept in log space, with exp(raw) + var_floor on
/// read. goal_bank row c and gain_bank rows [c*A, (c+1)*A) are the unique
/// home of skill c's goal and gain.
struct ModelParams {
  MlpTrunk encoder_trunk;            // obs -> h
  Matrix enc_mean_w, enc_mean_b;     // h -> S
  Matrix enc_var_w, enc_var_b;       // h -> S (raw, softplus + floor)
  MlpTrunk decoder_trunk;            // S -> h
  Matrix dec_out_w, dec_out_b;       // h -> O
  Matrix dec_log_var;                // [1 x O]
  MlpTrunk switcher_trunk;           // S -> hs (shared with the noise head)
  Matrix switch_w, switch_b;         // hs -> C logits
  Matrix noise_w, noise_b;           // hs -> C*A raw log-variances
  Matrix goal_bank;                  // [C x S]
  Matrix gain_bank;                  // [C*A x S], slab c = rows [c*A, (c+1)*A)
  Matrix free_mean_w;                // [C*A x S]  (plain-mixture ablation)
  Matrix free_mean_b;                // [C x A]
  Matrix prior_mean;                 // [1 x S]
  Matrix prior_log_var;              // [1 x S]

  /// Stable enumeration of every parameter tensor. The order defines the
  /// flattened parameter vector used by the optimizer and checkpoints.
  template <typename Self, typename F>
  static void visit_impl(Self& p, F&& f) {
    auto trunk = [&](const char* prefix, auto& t) {
      for (std::size_t l = 0; l < t.weights.size(); ++l) {
        f(std::string(prefix) + ".w" + std::to_string(l), t.weights[l]);
        f(std::string(prefix) + ".b" + std::to_string(l), t.biases[l]);
      }
    };
    trunk("encoder", p.encoder_trunk);
    f("encoder.mean_w", p.enc_mean_w);
    f("encoder.mean_b", p.enc_mean_b);
    f("encoder.var_w", p.enc_var_w);
    f("encoder.var_b", p.enc_var_b);
    trunk("decoder", p.decoder_trunk);
    f("decoder.out_w", p.dec_out_w);
    f("decoder.out_b", p.dec_out_b);
    f("decoder.log_var", p.dec_log_var);
    trunk("switcher", p.switcher_trunk);
    f("switcher.logits_w", p.switch_w);
    f("switcher.logits_b", p.switch_b);
    f("noise_head.w", p.noise_w);
    f("noise_head.b", p.noise_b);
    f("goal_bank", p.goal_bank);
    f("gain_bank", p.gain_bank);
    f("free_mean_w", p.free_mean_w);
    f("free_mean_b", p.free_mean_b);
    f("prior_mean", p.prior_mean);
    f("prior_log_var", p.prior_log_var);
  }

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, std::forward<F>(f));
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, std::forward<F>(f));
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
  }

  double l2_norm() const {
    double acc = 0.0;
    visit([&](const std::string&, const Matrix& m) {
      for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
    });
    return std::sqrt(acc);
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
    return ok;
  }
};

/// Seeded initialization. Trunk weights are uniform fan-in scaled; output
/// heads start at zero so the encoder matches the prior and the switcher is
/// uniform. Goals start scattered to break mixture symmetry; gains start as
/// small near-orthonormal maps.
inline ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t O = cfg.obs_dim, A = cfg.action_dim, S = cfg.latent_dim,
                    C = cfg.num_skills;
  ModelParams p;
  p.encoder_trunk = detail::make_trunk(O, cfg.encoder_hidden, rng);
  std::size_t he = detail::trunk_out_dim(p.encoder_trunk, O);
  p.enc_mean_w = Matrix(S, he);
  p.enc_mean_b = Matrix(1, S);
  p.enc_var_w = Matrix(S, he);
  p.enc_var_b = Matrix(1, S);

  p.decoder_trunk = detail::make_trunk(S, cfg.decoder_hidden, rng);
  std::size_t hd = detail::trunk_out_dim(p.decoder_trunk, S);
  p.dec_out_w = Matrix(O, hd);
  p.dec_out_b = Matrix(1, O);
  p.dec_log_var = Matrix(1, O);

  p.switcher_trunk = detail::make_trunk(S, cfg.switcher_hidden, rng);
  std::size_t hs = detail::trunk_out_dim(p.switcher_trunk, S);
  p.switch_w = Matrix(C, hs);
  p.switch_b = Matrix(1, C);
  p.noise_w = Matrix(C * A, hs);
  p.noise_b = Matrix(1, C * A);

  p.goal_bank = rng.normal_matrix(C, S, 0.5);
  p.gain_bank = Matrix(C * A, S);
  for (std::size_t c = 0; c < C; ++c) {
    Matrix slab = detail::scaled_orthonormal_rows(A, S, 0.1, rng);
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < S; ++j) p.gain_bank(c * A + i, j) = slab(i, j);
  }
  {
    double s = 1.0 / std::sqrt(static_cast<double>(S));
    p.free_mean_w = Matrix(C * A, S);
    for (std::size_t i = 0; i < p.free_mean_w.size(); ++i)
      p.free_mean_w.data()[i] = rng.uniform(-s, s);
    p.free_mean_b = Matrix(C, A);
  }

  p.prior_mean = Matrix(1, S);
  // Prior variance starts equal to the zero-initialized encoder's output
  // variance softplus(0) + floor, so kl_z = 0 at initialization.
  p.prior_log_var = Matrix(1, S, std::log(std::log(2.0)));
  return p;
}

}  // namespace slfc
