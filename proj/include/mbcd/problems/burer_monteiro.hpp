#pragma once

#include "mbcd/objectives.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Burer-Monteiro factorization of  min trace(C Z), Z >= 0, Z_ii = I_d:
// substitute Z = Y^T Y with Y = [Y_1 ... Y_n], each Y_i an r x d frame
// (a sphere when d = 1), giving
//
//   F(Y) = trace(C Y^T Y) = sum_ij trace(C_ij Y_j^T Y_i).
//
// Freezing all but block i leaves the linear objective 2 <B_i, Y_i> with
// B_i = sum_{j != i} Y_j C_ji (the diagonal term trace(C_ii Y_i^T Y_i) is
// constant on the frame manifold), minimized by the negated polar factor.
// d = 1 with C a graph matrix is the Max-Cut relaxation; d = r > 1 with
// relative-rotation couplings is rotation synchronization over O(d).
// ---------------------------------------------------------------------------

class BmProblem : public Problem {
 public:
  BmProblem(std::string name, SymMatrix c, int n, int d, int r)
      : Problem(std::move(name), make_blocks(n, d, r)), c_(std::move(c)), n_(n), d_(d), r_(r) {
    require(c_.n() == n * d, "bm: C must be (n d) x (n d)");
  }

  int num_factors() const { return n_; }
  int factor_dim() const { return d_; }
  int rank() const { return r_; }
  const SymMatrix& cost() const { return c_; }

  MatrixXd assemble(const ProductPoint& x) const {
    check_point(x);
    MatrixXd y(r_, n_ * d_);
    for (int i = 0; i < n_; ++i) y.middleCols(i * d_, d_) = as_matrix(x.block(i), r_, d_);
    return y;
  }

  double value(const ProductPoint& x) const override {
    const MatrixXd y = assemble(x);
    return (c_.mat().cwiseProduct(y.transpose() * y)).sum();
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    const MatrixXd y = assemble(x);
    // d/dY trace(C Y^T Y) = 2 Y C; take block i.
    const MatrixXd g = 2.0 * y * c_.mat().middleCols(i * d_, d_);
    return as_vector(g);
  }

  bool has_exact_min(int i) const override {
    (void)i;
    return true;
  }

  BlockResult exact_min(int i, const ProductPoint& x) const override {
    const MatrixXd y = assemble(x);
    const MatrixXd b =
        y * c_.mat().middleCols(i * d_, d_) -
        as_matrix(x.block(i), r_, d_) * c_.mat().block(i * d_, i * d_, d_, d_);
    try {
      return {as_vector(MatrixXd(-polar_orthogonal_factor(b))), false};
    } catch (const degenerate_error&) {
      return {x.block(i), true};  // minimizer set is a continuum; keep previous
    }
  }

 private:
  static std::vector<ManifoldSpec> make_blocks(int n, int d, int r) {
    require(n >= 2, "bm: need at least two factors");
    require(d >= 1 && r >= d, "bm: need r >= d >= 1");
    std::vector<ManifoldSpec> blocks;
    blocks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      blocks.push_back(d == 1 ? ManifoldSpec::sphere(r) : ManifoldSpec::stiefel(r, d));
    return blocks;
  }

  SymMatrix c_;
  int n_, d_, r_;
};

// Exhaustive binary minimum of x^T C x over x in {-1, +1}^n; the tight lower
// target for full-rank Max-Cut runs on small graphs.
struct BinaryBruteForce {
  double value = 0.0;
  VectorXd assignment;
};

inline BinaryBruteForce binary_brute_force_min(const SymMatrix& c) {
  const int n = c.n();
  require(n >= 1 && n <= 24, "binary_brute_force_min: need 1 <= n <= 24");
  BinaryBruteForce best;
  best.value = std::numeric_limits<double>::infinity();
  VectorXd x(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1 ? 1.0 : -1.0;
    const double v = x.dot(c.mat() * x);
    if (v < best.value) {
      best.value = v;
      best.assignment = x;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

struct MaxcutGenerated {
  SymMatrix cost;
  std::optional<BinaryBruteForce> brute;  // filled for n <= 16
};

inline MaxcutGenerated generate_maxcut(int n, double density, Rng& rng) {
  require(n >= 2, "generate_maxcut: need n >= 2");
  require(density > 0.0 && density <= 1.0, "generate_maxcut: density in (0, 1]");
  MatrixXd w = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < density) {
        const double wij = rng.uniform(0.1, 1.0);
        w(i, j) = w(j, i) = wij;
      }
  MaxcutGenerated out{SymMatrix(w), std::nullopt};
  if (n <= 16) out.brute = binary_brute_force_min(out.cost);
  return out;
}

struct RotsyncGenerated {
  SymMatrix cost;
  std::vector<MatrixXd> rotations;  // planted R_i^*
  double target_value = 0.0;        // F at the planted solution
};

// Complete-graph synchronization: measurements approximate R_i^{*T} R_j^*
// (the gram convention Z_ij = Y_i^T Y_j), couplings C_ij = -(1/2) R~_ij.
inline RotsyncGenerated generate_rotsync(int n, int d, double noise, Rng& rng) {
  require(n >= 2 && d >= 2, "generate_rotsync: need n >= 2, d >= 2");
  require(noise >= 0.0, "generate_rotsync: noise must be nonnegative");
  RotsyncGenerated out{SymMatrix::zero(n * d), {}, 0.0};
  for (int i = 0; i < n; ++i) {
    for (;;) {
      try {
        out.rotations.push_back(polar_orthogonal_factor(rng.gaussian_matrix(d, d), true));
        break;
      } catch (const degenerate_error&) {
      }
    }
  }
  MatrixXd c = MatrixXd::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      MatrixXd meas = out.rotations[static_cast<std::size_t>(i)].transpose() *
                      out.rotations[static_cast<std::size_t>(j)];
      if (noise > 0.0) {
        for (;;) {
          try {
            meas = polar_orthogonal_factor(meas + noise * rng.gaussian_matrix(d, d), true);
            break;
          } catch (const degenerate_error&) {
          }
        }
      }
      c.block(i * d, j * d, d, d) = -0.5 * meas;
      c.block(j * d, i * d, d, d) = -0.5 * meas.transpose();
    }
  out.cost = SymMatrix(c);

  // Evaluate F at the planted stack Y_i = R_i^*.
  MatrixXd y(d, n * d);
  for (int i = 0; i < n; ++i) y.middleCols(i * d, d) = out.rotations[static_cast<std::size_t>(i)];
  out.target_value = (out.cost.mat().cwiseProduct(y.transpose() * y)).sum();
  return out;
}

}  // namespace mbcd
