#pragma once

#include "mbcd/objectives.hpp"

namespace mbcd {

// Closed-form minimizers of the per-residual weight objectives.
//
// Geman-McClure (after the outlier-process substitution):
//   min_{w in [0,1]} w r^2 + (sqrt(w) - 1)^2   at   w = 1 / (r^2 + 1)^2.
inline double gm_weight(double r) {
  const double d = r * r + 1.0;
  return 1.0 / (d * d);
}

// Smoothed l1:
//   min_{w in (0, 1/eps]} w r^2 + eps^2 w + 1/w   at   w = 1 / sqrt(r^2 + eps^2),
// and the minimum value is 2 sqrt(r^2 + eps^2).
inline double sl1_weight(double r, double eps) {
  require(eps > 0.0, "sl1_weight: eps must be positive");
  return 1.0 / std::sqrt(r * r + eps * eps);
}

// Weighted rigid alignment (Kabsch): minimize sum_i w_i ||b_i - R a_i - t||^2
// over R in SO(3), t in R^3.  Rank-2 cross-covariances (planar point sets)
// still determine R uniquely; only sigma_2 ~ 0 or vanishing weight mass is
// genuinely degenerate.
struct KabschResult {
  MatrixXd rotation;
  VectorXd translation;
  bool degenerate = false;
};

inline KabschResult weighted_kabsch(const MatrixXd& a, const MatrixXd& b, const VectorXd& w,
                                    const MatrixXd& fallback_r, const VectorXd& fallback_t) {
  require(a.rows() == 3 && b.rows() == 3 && a.cols() == b.cols() && a.cols() == w.size(),
          "weighted_kabsch: dimension mismatch");
  const double wsum = w.sum();
  if (wsum < 1e-12) return {fallback_r, fallback_t, true};

  const VectorXd abar = (a * w) / wsum;
  const VectorXd bbar = (b * w) / wsum;
  const MatrixXd ac = a.colwise() - abar;
  const MatrixXd bc = b.colwise() - bbar;
  const MatrixXd h = ac * w.asDiagonal() * bc.transpose();  // sum_i w_i (a_i-abar)(b_i-bbar)^T

  MatrixXd r;
  try {
    r = polar_orthogonal_factor(h.transpose(), /*special=*/true);
  } catch (const degenerate_error& e) {
    const VectorXd& sv = e.singular_values;
    if (sv.size() != 3 || sv[1] < 1e-12 * sv[0]) return {fallback_r, fallback_t, true};
    r = e.factor;  // rank 2: rotation still unique
  }
  return {r, bbar - r * abar, false};
}

// ---------------------------------------------------------------------------
// IRLS-style problems: estimate block x + weight block w coupling through
//
//   F(x, w) = sum_i  w_i r_i(x)^2 + penalty(w_i)
//
// with penalty (sqrt(w)-1)^2 on [0,1] for Geman-McClure and eps^2 w + 1/w on
// (0, 1/eps] for smoothed l1.  Both block subproblems are closed-form; the
// weight block is a box, so the problem exercises the non-smooth-last-block
// regime.
// ---------------------------------------------------------------------------

enum class IrlsLoss { GemanMcClure, SmoothedL1 };
enum class IrlsResidual { PointCloud, LinearRegression };

// SE(3) estimate blocks are stored flat as [vec(R); t] (9 + 3 entries).
inline Eigen::Map<const MatrixXd> pose_rotation(const VectorXd& pose) {
  require(pose.size() == 12, "irls: pose block must be [vec(R); t]");
  return Eigen::Map<const MatrixXd>(pose.data(), 3, 3);
}

class IrlsProblem : public Problem {
 public:
  // Point-cloud registration: source/target are 3 x m.
  IrlsProblem(std::string name, MatrixXd source, MatrixXd target, IrlsLoss loss, double eps)
      : Problem(std::move(name),
                pcr_blocks(static_cast<int>(source.cols()), loss, eps)),
        residual_(IrlsResidual::PointCloud),
        loss_(loss),
        eps_(eps),
        src_(std::move(source)),
        tgt_(std::move(target)) {
    require(src_.rows() == 3 && tgt_.rows() == 3 && src_.cols() == tgt_.cols(),
            "irls: point clouds must be 3 x m with matching m");
    require(src_.cols() >= 3, "irls: need at least 3 correspondences");
    validate_loss();
  }

  // Linear regression: design is m x n, observations m.
  IrlsProblem(std::string name, MatrixXd design, VectorXd obs, IrlsLoss loss, double eps)
      : Problem(std::move(name),
                linreg_blocks(static_cast<int>(design.rows()), static_cast<int>(design.cols()),
                              loss, eps)),
        residual_(IrlsResidual::LinearRegression),
        loss_(loss),
        eps_(eps),
        design_(std::move(design)),
        obs_(std::move(obs)) {
    require(design_.rows() == obs_.size(), "irls: design/observation mismatch");
    require(design_.rows() >= design_.cols(), "irls: need m >= n");
    validate_loss();
  }

  IrlsLoss loss() const { return loss_; }
  IrlsResidual residual_family() const { return residual_; }
  double eps() const { return eps_; }
  int num_residuals() const {
    return residual_ == IrlsResidual::PointCloud ? static_cast<int>(src_.cols())
                                                 : static_cast<int>(obs_.size());
  }

  VectorXd residuals(const VectorXd& estimate) const {
    if (residual_ == IrlsResidual::PointCloud) {
      const auto r = pose_rotation(estimate);
      const VectorXd t = estimate.tail(3);
      const MatrixXd e = tgt_ - ((r * src_).colwise() + t);
      return e.colwise().norm().transpose();
    }
    const int n = static_cast<int>(design_.cols());
    return design_ * estimate.head(n) - obs_;
  }

  double value(const ProductPoint& x) const override {
    check_point(x);
    const VectorXd r = residuals(x.block(0));
    const VectorXd& w = x.block(1);
    double total = 0.0;
    for (int i = 0; i < w.size(); ++i) total += w[i] * r[i] * r[i] + penalty(w[i]);
    return total;
  }

  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    check_point(x);
    const VectorXd& w = x.block(1);
    if (i == 1) {
      const VectorXd r = residuals(x.block(0));
      VectorXd g(w.size());
      for (int k = 0; k < w.size(); ++k) g[k] = r[k] * r[k] + penalty_prime(w[k]);
      return g;
    }
    require(i == 0, "irls: bad block index");
    if (residual_ == IrlsResidual::PointCloud) {
      const auto rot = pose_rotation(x.block(0));
      const VectorXd t = x.block(0).tail(3);
      const MatrixXd e = tgt_ - ((rot * src_).colwise() + t);
      // d/dR sum w_i ||e_i||^2 = -2 sum w_i e_i a_i^T, d/dt = -2 sum w_i e_i.
      const MatrixXd gr = -2.0 * (e * w.asDiagonal() * src_.transpose());
      VectorXd g(12);
      g.head(9) = as_vector(gr);
      g.tail(3) = -2.0 * (e * w);
      return g;
    }
    const int n = static_cast<int>(design_.cols());
    const VectorXd r = design_ * x.block(0).head(n) - obs_;
    return 2.0 * design_.transpose() * (w.asDiagonal() * r);
  }

  bool has_exact_min(int i) const override {
    (void)i;
    return true;
  }

  // The weight subproblem is strictly convex with a closed-form solution, so
  // its own section serves as the surrogate and MM coincides with exact
  // minimization there.
  bool has_majorizer(int i) const override { return i == 1; }

  const Majorizer& majorizer(int i) const override {
    if (i != 1) throw unsupported_operation(name() + ": only the weight block has a majorizer");
    return weight_majorizer_;
  }

  BlockResult exact_min(int i, const ProductPoint& x) const override {
    check_point(x);
    if (i == 1) {
      const VectorXd r = residuals(x.block(0));
      VectorXd w(r.size());
      for (int k = 0; k < r.size(); ++k)
        w[k] = loss_ == IrlsLoss::GemanMcClure ? gm_weight(r[k]) : sl1_weight(r[k], eps_);
      return {std::move(w), false};
    }
    require(i == 0, "irls: bad block index");
    const VectorXd& w = x.block(1);
    if (residual_ == IrlsResidual::PointCloud) {
      const VectorXd& prev = x.block(0);
      const KabschResult k = weighted_kabsch(src_, tgt_, w, MatrixXd(pose_rotation(prev)),
                                             VectorXd(prev.tail(3)));
      VectorXd out(12);
      out.head(9) = as_vector(k.rotation);
      out.tail(3) = k.translation;
      return {std::move(out), k.degenerate};
    }
    if (w.sum() < 1e-12) return {x.block(0), true};
    const VectorXd sqw = w.cwiseSqrt();
    return {least_squares(sqw.asDiagonal() * design_, VectorXd(sqw.cwiseProduct(obs_))), false};
  }

 private:
  void validate_loss() {
    require(loss_ == IrlsLoss::GemanMcClure || eps_ > 0.0, "irls: smoothed l1 needs eps > 0");
  }

  double penalty(double w) const {
    if (loss_ == IrlsLoss::GemanMcClure) {
      const double s = std::sqrt(w) - 1.0;
      return s * s;
    }
    return eps_ * eps_ * w + 1.0 / w;
  }

  double penalty_prime(double w) const {
    if (loss_ == IrlsLoss::GemanMcClure) return 1.0 - 1.0 / std::sqrt(w);
    return eps_ * eps_ - 1.0 / (w * w);
  }

  static ManifoldSpec weight_box(int m, IrlsLoss loss, double eps) {
    const double hi = loss == IrlsLoss::GemanMcClure ? 1.0 : 1.0 / eps;
    require(loss == IrlsLoss::GemanMcClure || eps > 0.0, "irls: smoothed l1 needs eps > 0");
    return ManifoldSpec::box(VectorXd::Zero(m), VectorXd::Constant(m, hi));
  }

  static std::vector<ManifoldSpec> pcr_blocks(int m, IrlsLoss loss, double eps) {
    return {ManifoldSpec::product({ManifoldSpec::special_orthogonal(3), ManifoldSpec::euclidean(3)}),
            weight_box(m, loss, eps)};
  }

  static std::vector<ManifoldSpec> linreg_blocks(int m, int n, IrlsLoss loss, double eps) {
    return {ManifoldSpec::euclidean(n), weight_box(m, loss, eps)};
  }

  IrlsResidual residual_;
  IrlsLoss loss_;
  double eps_;
  MatrixXd src_, tgt_;   // point-cloud family
  MatrixXd design_;      // regression family
  VectorXd obs_;
  RestrictionMajorizer weight_majorizer_{*this, 1};
};

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

struct IrlsPcrGenerated {
  MatrixXd source, target;
  MatrixXd rotation;
  VectorXd translation;
  std::vector<int> outliers;  // indices of corrupted correspondences
};

inline IrlsPcrGenerated generate_pcr(int m, double noise, double outlier_fraction, Rng& rng) {
  require(m >= 3, "generate_pcr: need m >= 3");
  IrlsPcrGenerated out;
  out.source = rng.gaussian_matrix(3, m);
  for (;;) {
    try {
      out.rotation = polar_orthogonal_factor(rng.gaussian_matrix(3, 3), true);
      break;
    } catch (const degenerate_error&) {
    }
  }
  out.translation = rng.gaussian_vector(3);
  out.target = (out.rotation * out.source).colwise() + out.translation;
  if (noise > 0.0) out.target += noise * rng.gaussian_matrix(3, m);
  const int num_outliers = static_cast<int>(std::floor(outlier_fraction * m));
  for (int k = 0; k < num_outliers; ++k) {
    out.outliers.push_back(k);
    out.target.col(k) = 5.0 * rng.gaussian_vector(3);
  }
  return out;
}

struct IrlsLinregGenerated {
  MatrixXd design;
  VectorXd obs;
  VectorXd coef;
};

inline IrlsLinregGenerated generate_linreg(int m, int n, double noise, double outlier_fraction,
                                           Rng& rng) {
  require(m >= n && n >= 1, "generate_linreg: need m >= n >= 1");
  IrlsLinregGenerated out;
  out.design = rng.gaussian_matrix(m, n);
  out.coef = rng.gaussian_vector(n);
  out.obs = out.design * out.coef;
  if (noise > 0.0) out.obs += noise * rng.gaussian_vector(m);
  const int num_outliers = static_cast<int>(std::floor(outlier_fraction * m));
  for (int k = 0; k < num_outliers; ++k) out.obs[k] += rng.uniform(3.0, 6.0);
  return out;
}

}  // namespace mbcd
