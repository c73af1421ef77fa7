#pragma once

#include "mbcd/objectives.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Alternating projection as two-block descent on F(x1, x2) = ||x1 - x2||^2
// with x_i constrained to factors that admit metric projections (spheres and
// affine subspaces).  Exact minimization of block i is the projection of the
// other block's point, so cyclic sweeps reproduce the classical scheme.
// ---------------------------------------------------------------------------

class ApProblem : public Problem {
 public:
  ApProblem(std::string name, ManifoldSpec factor1, ManifoldSpec factor2)
      : Problem(std::move(name), {factor1, factor2}) {
    require(factor1.ambient_dim() == factor2.ambient_dim(),
            "ap: factors must share the ambient space");
    for (const auto& f : blocks())
      require(f.get_if<Sphere>() != nullptr || f.get_if<Affine>() != nullptr,
              "ap: factors must be spheres or affine subspaces");
  }

  double value(const ProductPoint& x) const override {
    check_point(x);
    return (x.block(0) - x.block(1)).squaredNorm();
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    check_point(x);
    const VectorXd d = x.block(0) - x.block(1);
    return i == 0 ? VectorXd(2.0 * d) : VectorXd(-2.0 * d);
  }

  bool has_exact_min(int i) const override {
    (void)i;
    return true;
  }

  // Metric projection of the other factor's point onto this factor.
  BlockResult exact_min(int i, const ProductPoint& x) const override {
    check_point(x);
    require(i == 0 || i == 1, "ap: bad block index");
    const VectorXd& other = x.block(1 - i);
    const ManifoldSpec& spec = block_spec(i);
    if (spec.get_if<Sphere>() != nullptr && other.norm() < 1e-14)
      return {x.block(i), true};  // projection of the center is the whole sphere
    return {reproject(spec, other), false};
  }
};

struct ApGenerated {
  ManifoldSpec factor1;
  ManifoldSpec factor2;
  double target_value = 0.0;  // infimum of F (0 when the factors meet)
};

// Two random lines through the origin in R^3: the classical linearly
// convergent case, intersecting at 0.
inline ApGenerated generate_ap_lines(Rng& rng) {
  auto line = [&]() {
    for (;;) {
      const VectorXd g = rng.gaussian_vector(3);
      if (g.norm() > 1e-12)
        return ManifoldSpec::affine(VectorXd::Zero(3), MatrixXd(g / g.norm()));
    }
  };
  return {line(), line(), 0.0};
}

// Unit sphere + an affine subspace that intersects it: the offset is pulled
// inside the ball so the projections meet.
inline ApGenerated generate_ap_sphere_affine(int n, int subspace_dim, Rng& rng) {
  require(n >= 2 && subspace_dim >= 1 && subspace_dim < n,
          "generate_ap_sphere_affine: need n >= 2, 1 <= dim < n");
  MatrixXd basis;
  for (;;) {
    try {
      basis = polar_orthogonal_factor(rng.gaussian_matrix(n, subspace_dim));
      break;
    } catch (const degenerate_error&) {
    }
  }
  VectorXd offset = rng.gaussian_vector(n);
  offset -= basis * (basis.transpose() * offset);  // keep only the normal part
  const double d = offset.norm();
  if (d > 0.5) offset *= 0.5 / d;  // distance to the subspace < 1: intersection nonempty
  return {ManifoldSpec::sphere(n), ManifoldSpec::affine(offset, basis), 0.0};
}

}  // namespace mbcd
