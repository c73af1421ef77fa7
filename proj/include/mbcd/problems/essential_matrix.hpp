#pragma once

#include "mbcd/objectives.hpp"

namespace mbcd {

inline MatrixXd hat3(const VectorXd& t) {
  require(t.size() == 3, "hat3: needs a 3-vector");
  MatrixXd m(3, 3);
  m << 0.0, -t[2], t[1], t[2], 0.0, -t[0], -t[1], t[0], 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Essential-matrix estimation from bearing correspondences (u_k, v_k):
//
//   F(R, t) = sum_k ( v_k^T [t]_x R u_k )^2,   R in SO(3), t on the sphere.
//
// The residual is the scalar triple product v^T (t x R u) = t^T (R u x v),
// so with R frozen the t-block is a Rayleigh quotient: the bottom eigenvector
// of sum_k w_k w_k^T with w_k = (R u_k) x v_k.  The R-block has no closed
// form here and is handled by Riemannian gradient steps.
// ---------------------------------------------------------------------------

class EssentialProblem : public Problem {
 public:
  // Blocks in rate-friendly order: R first (gradient block), t last (exact).
  EssentialProblem(std::string name, MatrixXd view1, MatrixXd view2)
      : Problem(std::move(name), {ManifoldSpec::special_orthogonal(3), ManifoldSpec::sphere(3)}),
        u_(std::move(view1)),
        v_(std::move(view2)) {
    require(u_.rows() == 3 && v_.rows() == 3 && u_.cols() == v_.cols(),
            "essential: views must be 3 x m with matching m");
    require(u_.cols() >= 5, "essential: need at least 5 correspondences");
  }

  int num_pairs() const { return static_cast<int>(u_.cols()); }

  // w_k = (R u_k) x v_k, the coefficient vectors of the t-linear residuals.
  MatrixXd moment_vectors(const VectorXd& r_flat) const {
    const auto r = as_matrix(r_flat, 3, 3);
    const MatrixXd ru = r * u_;
    MatrixXd w(3, num_pairs());
    for (int k = 0; k < num_pairs(); ++k) {
      const Eigen::Vector3d a = ru.col(k);
      const Eigen::Vector3d b = v_.col(k);
      w.col(k) = a.cross(b);
    }
    return w;
  }

  double value(const ProductPoint& x) const override {
    check_point(x);
    const MatrixXd w = moment_vectors(x.block(0));
    const VectorXd rho = w.transpose() * x.block(1);
    return rho.squaredNorm();
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    check_point(x);
    const VectorXd& t = x.block(1);
    if (i == 1) {
      const MatrixXd w = moment_vectors(x.block(0));
      return 2.0 * w * (w.transpose() * t);
    }
    require(i == 0, "essential: bad block index");
    const auto r = as_matrix(x.block(0), 3, 3);
    const MatrixXd tx = hat3(t);
    MatrixXd g = MatrixXd::Zero(3, 3);
    for (int k = 0; k < num_pairs(); ++k) {
      // rho = v^T [t]_x R u, so d rho / dR = ([t]_x^T v) u^T.
      const VectorXd lhs = tx.transpose() * v_.col(k);
      const double rho = v_.col(k).dot(tx * (r * u_.col(k)));
      g += 2.0 * rho * lhs * u_.col(k).transpose();
    }
    return as_vector(g);
  }

  bool has_exact_min(int i) const override { return i == 1; }

  BlockResult exact_min(int i, const ProductPoint& x) const override {
    require(i == 1, "essential: only the t block has an exact minimizer");
    check_point(x);
    const MatrixXd w = moment_vectors(x.block(0));
    const SymMatrix m(w * w.transpose());
    return {smallest_eigvecs(m, 1), m.mat().cwiseAbs().maxCoeff() == 0.0};
  }

 private:
  MatrixXd u_, v_;
};

struct EssentialGenerated {
  MatrixXd view1, view2;
  MatrixXd rotation;
  VectorXd translation;
};

// Bearings of a common scene: X in view 1, R X + t in view 2 (normalized),
// which satisfy the epipolar constraint exactly when noise = 0.
inline EssentialGenerated generate_essential(int m, double noise, Rng& rng) {
  require(m >= 5, "generate_essential: need m >= 5");
  EssentialGenerated out;
  for (;;) {
    try {
      out.rotation = polar_orthogonal_factor(rng.gaussian_matrix(3, 3), true);
      break;
    } catch (const degenerate_error&) {
    }
  }
  for (;;) {
    const VectorXd t = rng.gaussian_vector(3);
    if (t.norm() > 1e-6) {
      out.translation = t / t.norm();
      break;
    }
  }
  out.view1.resize(3, m);
  out.view2.resize(3, m);
  for (int k = 0; k < m; ++k) {
    VectorXd scene = rng.gaussian_vector(3);
    scene[2] += 3.0;  // keep the scene loosely in front of both cameras
    VectorXd d1 = scene / scene.norm();
    VectorXd d2 = out.rotation * scene + out.translation;
    d2 /= d2.norm();
    if (noise > 0.0) {
      d1 = (d1 + noise * rng.gaussian_vector(3)).normalized();
      d2 = (d2 + noise * rng.gaussian_vector(3)).normalized();
    }
    out.view1.col(k) = d1;
    out.view2.col(k) = d2;
  }
  return out;
}

}  // namespace mbcd
