#pragma once

#include <optional>

#include "mbcd/manifolds.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Majorizing surrogate for one block: G(xi, z) >= F(z with block i := xi) with
// equality and matching first-block gradient at xi = z_i.  minimize returns
// argmin_xi G(xi, z) over the block manifold.
// ---------------------------------------------------------------------------

class Majorizer {
 public:
  virtual ~Majorizer() = default;
  virtual double value(const VectorXd& xi, const ProductPoint& z) const = 0;
  virtual VectorXd grad_first(const VectorXd& xi, const ProductPoint& z) const = 0;
  virtual VectorXd minimize(const ProductPoint& z) const = 0;
};

// Result of a closed-form block subproblem.  degenerate flags minimizer sets
// that are not singletons (zero weight mass, rank-deficient data); the point
// is still a valid minimizer by convention and the caller picks the policy.
struct BlockResult {
  VectorXd point;
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// Optimization problem over a product of manifold blocks.  Points and
// gradients use flat ambient coordinates per block; partial_grad is the
// ambient (Euclidean) partial gradient, from which Riemannian gradients are
// obtained by tangent projection.
// ---------------------------------------------------------------------------

class Problem {
 public:
  virtual ~Problem() = default;

  const std::string& name() const { return name_; }
  const std::vector<ManifoldSpec>& blocks() const { return blocks_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const ManifoldSpec& block_spec(int i) const {
    return blocks_.at(static_cast<std::size_t>(i));
  }

  virtual double value(const ProductPoint& x) const = 0;
  virtual VectorXd partial_grad(int i, const ProductPoint& x) const = 0;

  virtual bool has_exact_min(int i) const {
    (void)i;
    return false;
  }
  virtual BlockResult exact_min(int i, const ProductPoint& x) const {
    (void)x;
    throw unsupported_operation(name_ + ": block " + std::to_string(i + 1) +
                                " has no exact minimizer");
  }

  virtual bool has_majorizer(int i) const {
    (void)i;
    return false;
  }
  virtual const Majorizer& majorizer(int i) const {
    throw unsupported_operation(name_ + ": block " + std::to_string(i + 1) +
                                " has no majorizer");
  }

  void check_point(const ProductPoint& x) const {
    require(x.num_blocks() == num_blocks(), name_ + ": block count mismatch");
    for (int i = 0; i < num_blocks(); ++i)
      require(x.block(i).size() == blocks_[static_cast<std::size_t>(i)].ambient_dim(),
              name_ + ": block " + std::to_string(i + 1) + " dimension mismatch");
  }

 protected:
  Problem(std::string name, std::vector<ManifoldSpec> blocks)
      : name_(std::move(name)), blocks_(std::move(blocks)) {
    require(!blocks_.empty(), "Problem: needs at least one block");
  }

 private:
  std::string name_;
  std::vector<ManifoldSpec> blocks_;
};

inline ProductPoint with_block(const ProductPoint& x, int i, VectorXd v) {
  ProductPoint y = x;
  y.block(i) = std::move(v);
  return y;
}

// The objective's own block-i section as its (tightest possible) surrogate:
// G_i(xi; z) = F(z with block i = xi).  Minimizing it is exact minimization,
// so blocks with a closed-form solver get a majorize-minimize path for free.
class RestrictionMajorizer : public Majorizer {
 public:
  RestrictionMajorizer(const Problem& p, int i) : p_(&p), i_(i) {}

  double value(const VectorXd& xi, const ProductPoint& z) const override {
    return p_->value(with_block(z, i_, xi));
  }
  VectorXd grad_first(const VectorXd& xi, const ProductPoint& z) const override {
    return p_->partial_grad(i_, with_block(z, i_, xi));
  }
  VectorXd minimize(const ProductPoint& z) const override { return p_->exact_min(i_, z).point; }

 private:
  const Problem* p_;
  int i_;
};

// Riemannian partial gradient: tangent projection of the ambient partial.
inline VectorXd riemannian_block_grad(const Problem& p, int i, const ProductPoint& x) {
  return project_tangent(p.block_spec(i), x.block(i), p.partial_grad(i, x));
}

// || rgrad F(x) || over the first `scope` blocks (all when scope < 0); the
// product-metric norm is the root of the summed squared block norms.  Throws
// for non-smooth blocks in scope, whose Riemannian gradient is undefined.
inline double riemannian_grad_norm(const Problem& p, const ProductPoint& x, int scope = -1) {
  const int n = scope < 0 ? p.num_blocks() : scope;
  require(n >= 0 && n <= p.num_blocks(), "riemannian_grad_norm: bad scope");
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!p.block_spec(i).smooth())
      throw unsupported_operation(p.name() + ": block " + std::to_string(i + 1) +
                                  " is non-smooth; no Riemannian gradient");
    sq += riemannian_block_grad(p, i, x).squaredNorm();
  }
  return std::sqrt(sq);
}

// F(x) - min_xi F(x with block i := xi): nonnegative gap to the block's
// coordinate-wise optimum.  Needs the exact-min capability.
inline double block_optimality_residual(const Problem& p, int i, const ProductPoint& x) {
  require(p.has_exact_min(i), p.name() + ": block optimality residual needs exact min");
  const BlockResult r = p.exact_min(i, x);
  return p.value(x) - p.value(with_block(x, i, r.point));
}

}  // namespace mbcd
