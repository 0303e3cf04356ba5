#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

inline constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

/// logsumexp with max-subtraction; tolerates -inf entries.
inline double logsumexp(const Vector& v) {
  if (v.empty()) throw ShapeError("logsumexp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf)
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

/// Diagonal-covariance Gaussian carried as (mean, elementwise variance).
struct DiagGaussian {
  Vector mean;
  Vector var;

  DiagGaussian(Vector mean_, Vector var_) : mean(std::move(mean_)), var(std::move(var_)) {
    if (mean.size() != var.size())
      throw ShapeError("DiagGaussian: mean and var lengths differ");
    for (double v : var)
      if (!(v > 0.0)) throw DomainError("DiagGaussian: variance must be positive");
  }

  std::size_t dim() const { return mean.size(); }
};

/// Categorical distribution over C outcomes, stored as log-probabilities.
struct CategoricalDist {
  Vector log_probs;

  explicit CategoricalDist(Vector lp) : log_probs(std::move(lp)) {
    if (log_probs.empty()) throw ShapeError("CategoricalDist: empty support");
    if (std::abs(logsumexp(log_probs)) > 1e-9)
      throw DomainError("CategoricalDist: log-probabilities not normalized");
  }

  std::size_t size() const { return log_probs.size(); }

  Vector probs() const {
    Vector p(log_probs.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_probs[i]);
    return p;
  }

  /// Highest-probability index; ties resolve to the lowest index.
  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < log_probs.size(); ++i)
      if (log_probs[i] > log_probs[best]) best = i;
    return best;
  }
};

/// Sum_i [ -1/2 ln(2 pi var_i) - (x_i - mean_i)^2 / (2 var_i) ]
inline double mvn_logpdf_diag(const Vector& x, const DiagGaussian& g) {
  if (x.size() != g.dim()) throw ShapeError("mvn_logpdf_diag: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - g.mean[i];
    acc += -0.5 * (kLog2Pi + std::log(g.var[i])) - 0.5 * d * d / g.var[i];
  }
  return acc;
}

/// Closed-form KL(q || p) for diagonal Gaussians.
inline double kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.dim() != p.dim()) throw ShapeError("kl_diag_gaussians: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    double d = q.mean[i] - p.mean[i];
    acc += 0.5 * (std::log(p.var[i] / q.var[i]) + (q.var[i] + d * d) / p.var[i] - 1.0);
  }
  return acc;
}

/// Sum_c q_c (ln q_c - ln p_c) with 0*ln 0 := 0. Returns +inf when p assigns
/// zero mass where q does not; that infinity is the flag.
inline double kl_categorical(const CategoricalDist& q, const CategoricalDist& p) {
  if (q.size() != p.size()) throw ShapeError("kl_categorical: size mismatch");
  double acc = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    double lq = q.log_probs[c];
    if (lq == -std::numeric_limits<double>::infinity()) continue;  // q_c = 0
    double qc = std::exp(lq);
    if (qc == 0.0) continue;
    if (p.log_probs[c] == -std::numeric_limits<double>::infinity())
      return std::numeric_limits<double>::infinity();
    acc += qc * (lq - p.log_probs[c]);
  }
  return acc;
}

/// Numerically stable log-softmax.
inline CategoricalDist log_softmax(const Vector& logits) {
  if (logits.empty()) throw ShapeError("log_softmax: empty input");
  double lse = logsumexp(logits);
  Vector lp(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) lp[i] = logits[i] - lse;
  return CategoricalDist(std::move(lp));
}

}  // namespace slfc
