#pragma once

#include <complex>
#include <vector>

#include "slfc/core/errors.hpp"
#include "slfc/core/linalg.hpp"
#include "slfc/core/matrix.hpp"
#include "slfc/sim/rollout.hpp"

namespace slfc {

struct LatentTransition {
  Vector z;
  Vector u;
  Vector z_next;
};

struct SkillStability {
  std::size_t skill = 0;  // 1-based
  bool fitted = false;
  std::size_t samples = 0;
  Matrix a;  // [S x S]
  Matrix b;  // [S x A]
  std::vector<std::complex<double>> closed_loop_eigs;  // eig(A - B K)
  double radius = 0.0;
  double folded_sign_radius = 0.0;  // eig(A + B K), the alternate convention
  bool stable = false;              // discrete-time: radius < 1
  double fit_residual = 0.0;        // RMS of ||z' - A z - B u||
};

struct StabilityReport {
  std::vector<SkillStability> skills;
};

/// Least-squares local linear dynamics z' = A z + B u per skill, and the
/// spectrum of the closed loop A - B K (u = K (g - z) contributes -B K z).
/// The folded-sign radius for A + B K is reported alongside. Skills with
/// fewer than S + A samples are marked unfitted.
inline StabilityReport stability_report(
    const std::vector<std::vector<LatentTransition>>& by_skill,
    const std::vector<Matrix>& gains) {
  if (by_skill.size() != gains.size())
    throw ShapeError("stability_report: one gain per skill group required");
  StabilityReport report;
  for (std::size_t c = 0; c < by_skill.size(); ++c) {
    SkillStability st;
    st.skill = c + 1;
    st.samples = by_skill[c].size();
    const Matrix& k = gains[c];
    const std::size_t S = k.cols(), A = k.rows();
    if (st.samples < S + A) {
      report.skills.push_back(std::move(st));
      continue;
    }
    const auto& group = by_skill[c];
    Matrix x(group.size(), S + A);
    Matrix y(group.size(), S);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].z.size() != S || group[i].u.size() != A || group[i].z_next.size() != S)
        throw ShapeError("stability_report: transition dims disagree with the gain bank");
      for (std::size_t j = 0; j < S; ++j) {
        x(i, j) = group[i].z[j];
        y(i, j) = group[i].z_next[j];
      }
      for (std::size_t j = 0; j < A; ++j) x(i, S + j) = group[i].u[j];
    }
    Matrix theta = lstsq(x, y);  // [(S+A) x S]
    st.a = Matrix(S, S);
    st.b = Matrix(S, A);
    for (std::size_t r = 0; r < S; ++r) {
      for (std::size_t j = 0; j < S; ++j) st.a(r, j) = theta(j, r);
      for (std::size_t j = 0; j < A; ++j) st.b(r, j) = theta(S + j, r);
    }
    Matrix resid = matmul(x, theta);
    double acc = 0.0;
    for (std::size_t i = 0; i < resid.rows(); ++i)
      for (std::size_t j = 0; j < S; ++j) {
        double d = resid(i, j) - y(i, j);
        acc += d * d;
      }
    st.fit_residual = std::sqrt(acc / static_cast<double>(group.size()));

    Matrix bk = matmul(st.b, k);  // [S x S]
    Matrix closed = st.a;
    Matrix folded = st.a;
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = 0; j < S; ++j) {
        closed(i, j) -= bk(i, j);
        folded(i, j) += bk(i, j);
      }
    st.closed_loop_eigs = eigvals(closed);
    for (const auto& ev : st.closed_loop_eigs)
      st.radius = std::max(st.radius, std::abs(ev));
    st.folded_sign_radius = spectral_radius(folded);
    st.stable = st.radius < 1.0;
    st.fitted = true;
    report.skills.push_back(std::move(st));
  }
  return report;
}

/// Group (z_t, u_t, z_{t+1}) triples from rollouts by the executing skill.
inline std::vector<std::vector<LatentTransition>> collect_transitions(
    const std::vector<RolloutResult>& rollouts, std::size_t num_skills) {
  std::vector<std::vector<LatentTransition>> by_skill(num_skills);
  for (const auto& r : rollouts) {
    for (std::size_t t = 0; t + 1 < r.latents.size(); ++t) {
      int c = r.skills[t];
      if (c < 1 || static_cast<std::size_t>(c) > num_skills)
        throw ContractError("collect_transitions: skill index out of range");
      by_skill[c - 1].push_back(
          {r.latents[t], r.trajectory.actions.row(t), r.latents[t + 1]});
    }
  }
  return by_skill;
}

/// Gain slabs of a trained model, one [A x S] matrix per skill.
inline std::vector<Matrix> gain_slabs(const ModelParams& p, const ModelConfig& cfg) {
  std::vector<Matrix> out;
  const std::size_t A = cfg.action_dim, S = cfg.latent_dim;
  for (std::size_t c = 0; c < cfg.num_skills; ++c) {
    Matrix k(A, S);
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < S; ++j) k(i, j) = p.gain_bank(c * A + i, j);
    out.push_back(std::move(k));
  }
  return out;
}

}  // namespace slfc
