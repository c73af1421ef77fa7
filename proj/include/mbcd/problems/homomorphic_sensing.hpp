#pragma once

#include <algorithm>

#include "mbcd/objectives.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Homomorphic sensing: recover x and an unknown orthogonal transform T from a
// finite family (permutations, sign patterns, signed permutations) given
// observations y ~ T A x:
//
//   F(x, T) = || y - T A x ||^2
//
// Blocks: Euclidean(n) for x (weighted least squares is exact) and the finite
// set for T, whose subproblem is solved by order statistics: matching sorted
// coordinates (rearrangement inequality) and/or coordinatewise signs.
// ---------------------------------------------------------------------------

enum class HsTransformClass { Permutation, Sign, SignedPermutation };

class HsProblem : public Problem {
 public:
  HsProblem(std::string name, MatrixXd design, VectorXd obs, HsTransformClass cls)
      : Problem(std::move(name),
                make_blocks(static_cast<int>(design.rows()), static_cast<int>(design.cols()), cls)),
        a_(std::move(design)),
        y_(std::move(obs)),
        cls_(cls) {
    require(a_.rows() == y_.size(), "hs: design/observation mismatch");
    require(a_.rows() >= a_.cols(), "hs: need m >= n");
    require_finite(a_, "hs design");
    require_finite(y_, "hs obs");
  }

  const MatrixXd& design() const { return a_; }
  const VectorXd& obs() const { return y_; }
  HsTransformClass transform_class() const { return cls_; }
  const FiniteSetDomain& domain() const {
    return *block_spec(1).get_if<FiniteSet>()->domain;
  }

  double value(const ProductPoint& x) const override {
    check_point(x);
    const int m = static_cast<int>(a_.rows());
    const auto t = as_matrix(x.block(1), m, m);
    return (y_ - t * (a_ * x.block(0))).squaredNorm();
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    check_point(x);
    const int m = static_cast<int>(a_.rows());
    const auto t = as_matrix(x.block(1), m, m);
    const VectorXd z = a_ * x.block(0);
    const VectorXd e = y_ - t * z;
    if (i == 0) return -2.0 * a_.transpose() * (t.transpose() * e);
    require(i == 1, "hs: bad block index");
    return as_vector(MatrixXd(-2.0 * e * z.transpose()));
  }

  bool has_exact_min(int i) const override {
    (void)i;
    return true;
  }

  BlockResult exact_min(int i, const ProductPoint& x) const override {
    check_point(x);
    const int m = static_cast<int>(a_.rows());
    if (i == 0) {
      // T orthogonal: ||y - T A x|| = ||T^T y - A x||.
      const auto t = as_matrix(x.block(1), m, m);
      return {least_squares(a_, VectorXd(t.transpose() * y_)), false};
    }
    require(i == 1, "hs: bad block index");
    return {transform_block_min(VectorXd(a_ * x.block(0))), false};
  }

  // argmin over the transform class of ||y - T z||^2, by order statistics.
  VectorXd transform_block_min(const VectorXd& z) const {
    const int m = static_cast<int>(y_.size());
    require(z.size() == m, "hs: z dimension mismatch");
    MatrixXd t = MatrixXd::Zero(m, m);
    switch (cls_) {
      case HsTransformClass::Sign: {
        // Coordinatewise: s_k = sign(y_k z_k), +1 on ties.
        for (int k = 0; k < m; ++k) t(k, k) = y_[k] * z[k] < 0.0 ? -1.0 : 1.0;
        break;
      }
      case HsTransformClass::Permutation: {
        // Rearrangement: pair equal ranks of y and z ascending.  T z places
        // z_j at row perm[j], so row rank_y[k] takes column rank_z[k].
        const auto ry = sorted_indices(y_);
        const auto rz = sorted_indices(z);
        for (int k = 0; k < m; ++k) t(ry[static_cast<std::size_t>(k)],
                                      rz[static_cast<std::size_t>(k)]) = 1.0;
        break;
      }
      case HsTransformClass::SignedPermutation: {
        // Signs can always make matched products positive, so magnitudes pair
        // by rank and each entry takes the sign that aligns it with y.
        const VectorXd ya = y_.cwiseAbs();
        const VectorXd za = z.cwiseAbs();
        const auto ry = sorted_indices(ya);
        const auto rz = sorted_indices(za);
        for (int k = 0; k < m; ++k) {
          const int row = ry[static_cast<std::size_t>(k)];
          const int col = rz[static_cast<std::size_t>(k)];
          t(row, col) = y_[row] * z[col] < 0.0 ? -1.0 : 1.0;
        }
        break;
      }
    }
    return as_vector(t);
  }

 private:
  static std::vector<int> sorted_indices(const VectorXd& v) {
    std::vector<int> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    return idx;
  }

  static std::vector<ManifoldSpec> make_blocks(int m, int n, HsTransformClass cls) {
    std::shared_ptr<const FiniteSetDomain> domain;
    switch (cls) {
      case HsTransformClass::Permutation:
        domain = std::make_shared<PermutationDomain>(m);
        break;
      case HsTransformClass::Sign:
        domain = std::make_shared<SignDomain>(m);
        break;
      case HsTransformClass::SignedPermutation:
        domain = std::make_shared<SignedPermutationDomain>(m);
        break;
    }
    return {ManifoldSpec::euclidean(n), ManifoldSpec::finite_set(std::move(domain))};
  }

  MatrixXd a_;
  VectorXd y_;
  HsTransformClass cls_;
};

struct HsGenerated {
  MatrixXd design;
  VectorXd obs;
  VectorXd coef;       // planted x^*
  VectorXd transform;  // planted T^* (ambient m x m)
};

inline HsGenerated generate_hs(int m, int n, HsTransformClass cls, double noise, Rng& rng) {
  require(m >= n && n >= 1, "generate_hs: need m >= n >= 1");
  HsGenerated out;
  out.design = rng.gaussian_matrix(m, n);
  out.coef = rng.gaussian_vector(n);
  switch (cls) {
    case HsTransformClass::Permutation:
      out.transform = PermutationDomain(m).sample(rng);
      break;
    case HsTransformClass::Sign:
      out.transform = SignDomain(m).sample(rng);
      break;
    case HsTransformClass::SignedPermutation:
      out.transform = SignedPermutationDomain(m).sample(rng);
      break;
  }
  out.obs = as_matrix(out.transform, m, m) * (out.design * out.coef);
  if (noise > 0.0) out.obs += noise * rng.gaussian_vector(m);
  return out;
}

}  // namespace mbcd
