#pragma once

#include <Eigen/Dense>
#include <functional>

#include "mbcd/core.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Dense symmetric matrices.  Construction symmetrizes (A+A^T)/2 and rejects
// non-finite input, so every downstream eigendecomposition sees an exactly
// symmetric operand.
// ---------------------------------------------------------------------------

class SymMatrix {
 public:
  explicit SymMatrix(const MatrixXd& a) {
    require(a.rows() == a.cols(), "SymMatrix: matrix must be square");
    require_finite(a, "SymMatrix");
    m_ = 0.5 * (a + a.transpose());
  }

  static SymMatrix zero(int n) { return SymMatrix(MatrixXd::Zero(n, n)); }

  int n() const { return static_cast<int>(m_.rows()); }
  const MatrixXd& mat() const { return m_; }

 private:
  MatrixXd m_;
};

struct EigPair {
  VectorXd values;   // ascending
  MatrixXd vectors;  // orthonormal columns, sign-normalized
};

// Deterministic sign convention: the first entry of each eigenvector whose
// magnitude exceeds 1e-12 is made positive.
inline void normalize_eigvec_signs(MatrixXd& vectors) {
  for (int j = 0; j < vectors.cols(); ++j) {
    for (int i = 0; i < vectors.rows(); ++i) {
      const double v = vectors(i, j);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) vectors.col(j) = -vectors.col(j);
        break;
      }
    }
  }
}

// Full spectrum of a symmetric matrix, eigenvalues ascending.  Backed by the
// dense tridiagonalization + implicit QL/QR solver; deterministic for a given
// input on a given build.
inline EigPair eig_sym(const SymMatrix& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(s.mat());
  require(solver.info() == Eigen::Success, "eig_sym: eigendecomposition failed");
  EigPair out{solver.eigenvalues(), solver.eigenvectors()};
  normalize_eigvec_signs(out.vectors);
  return out;
}

// Orthonormal basis for the span of the c eigenvectors with smallest
// eigenvalues.  When the eigen-gap lambda_{c+1} - lambda_c vanishes the
// returned frame is still a valid minimizer of the trace objective; callers
// that care about uniqueness can inspect smallest_eigvecs_gap.
inline MatrixXd smallest_eigvecs(const SymMatrix& s, int c) {
  require(c >= 1 && c <= s.n(), "smallest_eigvecs: need 1 <= c <= n");
  return eig_sym(s).vectors.leftCols(c);
}

// lambda_{c+1} - lambda_c; +inf when c == n.
inline double smallest_eigvecs_gap(const SymMatrix& s, int c) {
  require(c >= 1 && c <= s.n(), "smallest_eigvecs_gap: need 1 <= c <= n");
  if (c == s.n()) return std::numeric_limits<double>::infinity();
  const VectorXd vals = eig_sym(s).values;
  return vals[c] - vals[c - 1];
}

// ---------------------------------------------------------------------------
// Polar orthogonal factor.  For B = U S V^T returns Q = U V^T, the nearest
// matrix with orthonormal columns; with special=true (square B) the nearest
// rotation, flipping the singular direction of smallest singular value when
// det(U V^T) < 0.  Rank-deficient input (s_min < 1e-12 * s_max) throws a
// degenerate_error carrying the computed factor: the minimizer set is then a
// continuum (or, for special=true, uniqueness needs s_2 > 0) and the caller
// decides whether the convention representative is acceptable.
// ---------------------------------------------------------------------------

inline MatrixXd polar_orthogonal_factor(const MatrixXd& b, bool special = false) {
  require(b.rows() >= b.cols() && b.cols() >= 1,
          "polar_orthogonal_factor: need rows >= cols >= 1");
  require_finite(b, "polar_orthogonal_factor");
  if (special) require(b.rows() == b.cols(), "polar_orthogonal_factor: special needs square input");

  Eigen::JacobiSVD<MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MatrixXd u = svd.matrixU();
  const MatrixXd v = svd.matrixV();
  const VectorXd sv = svd.singularValues();

  MatrixXd q = u * v.transpose();
  if (special && q.determinant() < 0.0) {
    u.col(u.cols() - 1) *= -1.0;
    q = u * v.transpose();
  }

  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  if (smax <= 0.0 || smin < 1e-12 * smax) {
    throw degenerate_error("polar_orthogonal_factor: rank-deficient input", q, sv);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Linear least squares min_x ||A x - y||, m >= n, via a rank-revealing
// complete orthogonal decomposition; returns the minimum-norm solution when A
// is rank-deficient.
// ---------------------------------------------------------------------------

inline VectorXd least_squares(const MatrixXd& a, const VectorXd& y) {
  require(a.rows() >= a.cols(), "least_squares: need rows >= cols");
  require(a.rows() == y.size(), "least_squares: dimension mismatch");
  require_finite(a, "least_squares: A");
  require_finite(y, "least_squares: y");
  return a.completeOrthogonalDecomposition().solve(y);
}

// ---------------------------------------------------------------------------
// Central-difference gradient of a scalar function of a flat vector.
// ---------------------------------------------------------------------------

inline VectorXd finite_diff_gradient(const std::function<double(const VectorXd&)>& f,
                                     const VectorXd& x, double h = 1e-6) {
  require(h > 0.0, "finite_diff_gradient: h must be positive");
  VectorXd g(x.size());
  VectorXd xp = x;
  for (int k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    xp[k] = xk + h;
    const double fp = f(xp);
    xp[k] = xk - h;
    const double fm = f(xp);
    xp[k] = xk;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace mbcd
