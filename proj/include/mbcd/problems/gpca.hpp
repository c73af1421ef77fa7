#pragma once

#include "mbcd/objectives.hpp"

namespace mbcd {

// Huber loss: |r| outside [-eps, eps], smooth quadratic cap inside.
// h(r) = (r^2 + eps^2) / (2 eps) for |r| <= eps, |r| otherwise; h >= eps/2 > 0.
inline double huber(double r, double eps) {
  require(eps > 0.0, "huber: eps must be positive");
  const double a = std::abs(r);
  return a > eps ? a : (r * r + eps * eps) / (2.0 * eps);
}

// h'(s)/s, the IRLS-style curvature factor: 1/max(|s|, eps), smooth at 0.
inline double huber_curvature(double s, double eps) {
  require(eps > 0.0, "huber_curvature: eps must be positive");
  return 1.0 / std::max(std::abs(s), eps);
}

// Quadratic tangent majorizer of the Huber loss at anchor s:
// g(r, s) = h(s) + (r^2 - s^2) / (2 max(|s|, eps)) >= h(r), equal at r = s.
inline double huber_majorizer(double r, double s, double eps) {
  return huber(s, eps) + (r * r - s * s) / (2.0 * std::max(std::abs(s), eps));
}

// ---------------------------------------------------------------------------
// Generalized PCA: fit b orthogonal-complement frames A_i (D x c_i Stiefel
// blocks) to points p_1..p_m so every point is annihilated by some frame.
//
//   F_ls(A)    = sum_j prod_i ||A_i^T p_j||^2
//   F_huber(A) = sum_j prod_i h(||A_i^T p_j||)
//
// The block structure makes each subproblem a weighted eigenvector problem:
// with off-block factors frozen as weights, minimizing over A_i is finding
// the c_i smallest eigenvectors of a weighted scatter matrix.
// ---------------------------------------------------------------------------

enum class GpcaLoss { LeastSquares, Huber };

class GpcaProblem : public Problem {
 public:
  GpcaProblem(std::string name, MatrixXd points, std::vector<int> c, GpcaLoss loss,
              double eps = 0.0)
      : Problem(std::move(name), make_blocks(points, c)),
        p_(std::move(points)),
        c_(std::move(c)),
        loss_(loss),
        eps_(eps) {
    require(loss_ == GpcaLoss::LeastSquares || eps_ > 0.0, "gpca: Huber needs eps > 0");
    require_finite(p_, "gpca points");
    if (loss_ == GpcaLoss::Huber) {
      majorizers_.reserve(c_.size());
      for (int i = 0; i < num_blocks(); ++i)
        majorizers_.push_back(std::make_unique<HuberBlockMajorizer>(*this, i));
    }
  }

  int ambient_d() const { return static_cast<int>(p_.rows()); }
  int num_points() const { return static_cast<int>(p_.cols()); }
  const MatrixXd& points() const { return p_; }
  GpcaLoss loss() const { return loss_; }
  double eps() const { return eps_; }

  // ||A_i^T p_j|| for all i, j at the given point.
  MatrixXd factor_norms(const ProductPoint& x) const {
    check_point(x);
    MatrixXd s(num_blocks(), num_points());
    for (int i = 0; i < num_blocks(); ++i) {
      const auto a = as_matrix(x.block(i), ambient_d(), c_[static_cast<std::size_t>(i)]);
      s.row(i) = (p_.transpose() * a).rowwise().norm().transpose();
    }
    return s;
  }

  // Off-block weights w_{i,j} = prod_{i' != i} loss_factor(||A_{i'}^T p_j||),
  // evaluated at whatever mixed iterate x holds.
  VectorXd weights(int i, const ProductPoint& x) const {
    const MatrixXd s = factor_norms(x);
    return weights_from_norms(i, s);
  }

  double value(const ProductPoint& x) const override {
    const MatrixXd s = factor_norms(x);
    double total = 0.0;
    for (int j = 0; j < num_points(); ++j) {
      double prod = 1.0;
      for (int i = 0; i < num_blocks(); ++i) prod *= loss_factor(s(i, j));
      total += prod;
    }
    return total;
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    check_point(x);
    const MatrixXd s = factor_norms(x);
    const VectorXd w = weights_from_norms(i, s);
    const auto a = as_matrix(x.block(i), ambient_d(), c_[static_cast<std::size_t>(i)]);
    const MatrixXd u = p_.transpose() * a;  // rows are A_i^T p_j
    VectorXd coeff(num_points());
    for (int j = 0; j < num_points(); ++j) {
      coeff[j] = loss_ == GpcaLoss::LeastSquares
                     ? 2.0 * w[j]
                     : w[j] * huber_curvature(s(i, j), eps_);
    }
    return as_vector(MatrixXd(p_ * (coeff.asDiagonal() * u)));
  }

  bool has_exact_min(int i) const override {
    (void)i;
    return loss_ == GpcaLoss::LeastSquares;
  }

  // Weighted scatter eigenproblem: argmin over the Stiefel block of
  // sum_j w_j ||A^T p_j||^2 = the c_i bottom eigenvectors of P diag(w) P^T.
  BlockResult exact_min(int i, const ProductPoint& x) const override {
    if (!has_exact_min(i))
      throw unsupported_operation(name() + ": exact min is least-squares only");
    const VectorXd w = weights(i, x);
    const SymMatrix scatter(p_ * w.asDiagonal() * p_.transpose());
    BlockResult out;
    out.point = as_vector(smallest_eigvecs(scatter, c_[static_cast<std::size_t>(i)]));
    out.degenerate = (w.maxCoeff() == 0.0);
    return out;
  }

  bool has_majorizer(int i) const override {
    (void)i;
    return loss_ == GpcaLoss::Huber;
  }

  const Majorizer& majorizer(int i) const override {
    if (!has_majorizer(i))
      throw unsupported_operation(name() + ": majorizer is Huber only");
    return *majorizers_.at(static_cast<std::size_t>(i));
  }

 private:
  // Scalar factor entering the product over blocks.
  double loss_factor(double s) const {
    return loss_ == GpcaLoss::LeastSquares ? s * s : huber(s, eps_);
  }

  VectorXd weights_from_norms(int i, const MatrixXd& s) const {
    VectorXd w = VectorXd::Ones(num_points());
    for (int ip = 0; ip < num_blocks(); ++ip) {
      if (ip == i) continue;
      for (int j = 0; j < num_points(); ++j) w[j] *= loss_factor(s(ip, j));
    }
    return w;
  }

  static std::vector<ManifoldSpec> make_blocks(const MatrixXd& points,
                                               const std::vector<int>& c) {
    require(!c.empty(), "gpca: needs at least one block");
    require(points.cols() >= 1, "gpca: needs at least one point");
    std::vector<ManifoldSpec> blocks;
    blocks.reserve(c.size());
    for (const int ci : c)
      blocks.push_back(ManifoldSpec::stiefel(static_cast<int>(points.rows()), ci));
    return blocks;
  }

  // Separable surrogate: freeze off-block Huber factors as weights and
  // majorize the in-block factor by its quadratic tangent bound.  The result
  // is a weighted scatter objective sharing the eigenvector solve.
  class HuberBlockMajorizer : public Majorizer {
   public:
    HuberBlockMajorizer(const GpcaProblem& owner, int i) : owner_(owner), i_(i) {}

    double value(const VectorXd& xi, const ProductPoint& z) const override {
      const MatrixXd s = owner_.factor_norms(z);
      const VectorXd v = owner_.weights_from_norms(i_, s);
      const auto a = as_matrix(xi, owner_.ambient_d(), owner_.c_[static_cast<std::size_t>(i_)]);
      const VectorXd r = (owner_.p_.transpose() * a).rowwise().norm();
      double total = 0.0;
      for (int j = 0; j < owner_.num_points(); ++j)
        total += v[j] * huber_majorizer(r[j], s(i_, j), owner_.eps_);
      return total;
    }

    VectorXd grad_first(const VectorXd& xi, const ProductPoint& z) const override {
      const MatrixXd s = owner_.factor_norms(z);
      const VectorXd v = owner_.weights_from_norms(i_, s);
      const auto a = as_matrix(xi, owner_.ambient_d(), owner_.c_[static_cast<std::size_t>(i_)]);
      const MatrixXd u = owner_.p_.transpose() * a;
      VectorXd coeff(owner_.num_points());
      for (int j = 0; j < owner_.num_points(); ++j)
        coeff[j] = v[j] / std::max(s(i_, j), owner_.eps_);
      return as_vector(MatrixXd(owner_.p_ * (coeff.asDiagonal() * u)));
    }

    VectorXd minimize(const ProductPoint& z) const override {
      const MatrixXd s = owner_.factor_norms(z);
      const VectorXd v = owner_.weights_from_norms(i_, s);
      VectorXd coeff(owner_.num_points());
      for (int j = 0; j < owner_.num_points(); ++j)
        coeff[j] = v[j] / (2.0 * std::max(s(i_, j), owner_.eps_));
      const SymMatrix scatter(owner_.p_ * coeff.asDiagonal() * owner_.p_.transpose());
      return as_vector(smallest_eigvecs(scatter, owner_.c_[static_cast<std::size_t>(i_)]));
    }

   private:
    const GpcaProblem& owner_;
    int i_;
  };

  MatrixXd p_;
  std::vector<int> c_;
  GpcaLoss loss_;
  double eps_;
  std::vector<std::unique_ptr<HuberBlockMajorizer>> majorizers_;
};

// ---------------------------------------------------------------------------
// Synthetic instances: points drawn from a union of subspaces S_i (each the
// orthogonal complement of a planted frame A_i^*), unit-normalized, with
// optional Gaussian noise and box outliers.
// ---------------------------------------------------------------------------

struct GpcaGroundTruth {
  std::vector<MatrixXd> frames;       // planted A_i^*
  std::vector<int> assignment;        // subspace index per point (-1 for outliers)
};

struct GpcaGenerated {
  MatrixXd points;
  GpcaGroundTruth truth;
};

inline GpcaGenerated generate_gpca(int d, int m, const std::vector<int>& c, double noise,
                                   double outlier_fraction, Rng& rng) {
  require(d >= 2 && m >= 1, "generate_gpca: need D >= 2, m >= 1");
  require(noise >= 0.0 && outlier_fraction >= 0.0 && outlier_fraction <= 1.0,
          "generate_gpca: bad noise/outlier parameters");
  const int b = static_cast<int>(c.size());
  require(b >= 1, "generate_gpca: needs at least one subspace");
  for (const int ci : c) require(ci >= 1 && ci < d, "generate_gpca: need 1 <= c_i < D");

  GpcaGenerated out;
  std::vector<MatrixXd> span_bases;
  for (int i = 0; i < b; ++i) {
    // Random D x D frame; first c_i columns are the complement frame A_i^*,
    // the rest span the subspace the points live in.
    MatrixXd q;
    for (;;) {
      try {
        q = polar_orthogonal_factor(rng.gaussian_matrix(d, d));
        break;
      } catch (const degenerate_error&) {
      }
    }
    out.truth.frames.push_back(q.leftCols(c[static_cast<std::size_t>(i)]));
    span_bases.push_back(q.rightCols(d - c[static_cast<std::size_t>(i)]));
  }

  out.points.resize(d, m);
  out.truth.assignment.resize(static_cast<std::size_t>(m));
  const int num_outliers = static_cast<int>(std::floor(outlier_fraction * m));
  for (int j = 0; j < m; ++j) {
    if (j < num_outliers) {
      out.truth.assignment[static_cast<std::size_t>(j)] = -1;
      VectorXd v(d);
      for (int k = 0; k < d; ++k) v[k] = rng.uniform(-1.0, 1.0);
      out.points.col(j) = v;
      continue;
    }
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(b)));
    out.truth.assignment[static_cast<std::size_t>(j)] = i;
    const MatrixXd& basis = span_bases[static_cast<std::size_t>(i)];
    VectorXd p = basis * rng.gaussian_vector(static_cast<int>(basis.cols()));
    const double n = p.norm();
    if (n > 1e-12) p /= n;
    if (noise > 0.0) p += noise * rng.gaussian_vector(d);
    out.points.col(j) = p;
  }
  return out;
}

}  // namespace mbcd
