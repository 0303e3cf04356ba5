#pragma once

#include "slfc/core/linalg.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

/// A linear layer u = W z + b rewritten as the feedback law u = K (g - z).
struct LayerController {
  Matrix gain;      // K = -W
  Vector goal;      // g = -pinv(W) b
  double residual;  // ||b - W pinv(W) b||; zero iff b lies in range(W)
};

/// K = -W, g = -pinv(W) b. When b is in the column space of W the two forms
/// agree for every z; otherwise the leftover component of b is reported.
inline LayerController layer_to_controller(const Matrix& w, const Vector& b,
                                           double tol = 1e-10) {
  if (w.rows() != b.size()) throw ShapeError("layer_to_controller: b length != rows(W)");
  LayerController out;
  out.gain = w;
  for (std::size_t i = 0; i < out.gain.size(); ++i) out.gain.data()[i] = -out.gain.data()[i];
  Vector g = matvec(pinv(w, tol), b);
  for (auto& x : g) x = -x;
  // residual = b + W g = (I - W W†) b
  Vector r = matvec(w, g);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  out.residual = norm2(r);
  out.goal = std::move(g);
  return out;
}

/// g = pinv(K) u + z: the goal a feedback law must have aimed at to emit u
/// from state z.
inline Vector estimate_goal(const Matrix& k, const Vector& u, const Vector& z,
                            double tol = 1e-10) {
  if (k.rows() != u.size()) throw ShapeError("estimate_goal: u length != rows(K)");
  if (k.cols() != z.size()) throw ShapeError("estimate_goal: z length != cols(K)");
  Vector g = matvec(pinv(k, tol), u);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += z[i];
  return g;
}

}  // namespace slfc
