#include <gtest/gtest.h>

#include "mbcd/problems/gpca.hpp"

namespace mbcd {
namespace {

GpcaProblem make_ls(Rng& rng, int d = 4, int m = 60, std::vector<int> c = {2, 1}) {
  const auto gen = generate_gpca(d, m, c, 0.05, 0.1, rng);
  return GpcaProblem("ls", gen.points, c, GpcaLoss::LeastSquares);
}

GpcaProblem make_huber(Rng& rng, int d = 4, int m = 60, std::vector<int> c = {2, 1},
                       double eps = 0.1) {
  const auto gen = generate_gpca(d, m, c, 0.05, 0.1, rng);
  return GpcaProblem("huber", gen.points, c, GpcaLoss::Huber, eps);
}

ProductPoint random_feasible(const Problem& p, Rng& rng) {
  return random_product_point(p.blocks(), rng);
}

TEST(GpcaScalars, HuberPiecewiseAndFloor) {
  const double eps = 0.3;
  for (double r : {-2.0, -0.31, -0.3, -0.1, 0.0, 0.05, 0.3, 0.7, 10.0}) {
    const double h = huber(r, eps);
    if (std::abs(r) > eps) {
      EXPECT_DOUBLE_EQ(h, std::abs(r));
    } else {
      EXPECT_NEAR(h, (r * r + eps * eps) / (2 * eps), 1e-15);
    }
    EXPECT_GE(h, eps / 2 - 1e-15);
  }
  // Continuity and slope matching across the |r| = eps seam.
  EXPECT_NEAR(huber(eps - 1e-9, eps), huber(eps + 1e-9, eps), 1e-8);
  const double fd = (huber(eps + 1e-7, eps) - huber(eps - 1e-7, eps)) / 2e-7;
  EXPECT_NEAR(fd, 1.0, 1e-6);
}

TEST(GpcaScalars, CurvatureMatchesDerivativeRatio) {
  const double eps = 0.2;
  for (double s : {-3.0, -0.5, -0.21, 0.19, 0.4, 2.5}) {
    const double hp = (huber(s + 1e-7, eps) - huber(s - 1e-7, eps)) / 2e-7;
    EXPECT_NEAR(huber_curvature(s, eps), hp / s, 1e-5);
  }
  EXPECT_DOUBLE_EQ(huber_curvature(0.0, eps), 1.0 / eps);
}

TEST(GpcaScalars, MajorizerDominatesAndIsTangent) {
  const double eps = 0.25;
  for (double s = -3.0; s <= 3.0; s += 0.05) {
    for (double r = -3.0; r <= 3.0; r += 0.05) {
      EXPECT_GE(huber_majorizer(r, s, eps) - huber(r, eps), -1e-12)
          << "r=" << r << " s=" << s;
    }
    EXPECT_NEAR(huber_majorizer(s, s, eps), huber(s, eps), 1e-14);
    // d/dr g(r, s) at r = s equals h'(s).
    const double gd = (huber_majorizer(s + 1e-7, s, eps) - huber_majorizer(s - 1e-7, s, eps)) / 2e-7;
    const double hd = (huber(s + 1e-7, eps) - huber(s - 1e-7, eps)) / 2e-7;
    EXPECT_NEAR(gd, hd, 1e-6);
  }
}

TEST(GpcaProblemT, ValueMatchesDirectProduct) {
  Rng rng(11);
  const auto gen = generate_gpca(4, 40, {2, 1}, 0.05, 0.1, rng);
  for (const GpcaLoss loss : {GpcaLoss::LeastSquares, GpcaLoss::Huber}) {
    const GpcaProblem p("g", gen.points, {2, 1}, loss, 0.1);
    const ProductPoint x = random_feasible(p, rng);
    double direct = 0.0;
    for (int j = 0; j < 40; ++j) {
      double prod = 1.0;
      const auto a1 = as_matrix(x.block(0), 4, 2);
      const auto a2 = as_matrix(x.block(1), 4, 1);
      const double s1 = (a1.transpose() * gen.points.col(j)).norm();
      const double s2 = (a2.transpose() * gen.points.col(j)).norm();
      if (loss == GpcaLoss::LeastSquares) {
        prod = s1 * s1 * s2 * s2;
      } else {
        prod = huber(s1, 0.1) * huber(s2, 0.1);
      }
      direct += prod;
    }
    EXPECT_NEAR(p.value(x), direct, 1e-12 * (1.0 + std::abs(direct)));
  }
}

TEST(GpcaProblemT, PartialGradMatchesFiniteDifference) {
  Rng rng(12);
  const GpcaProblem ls = make_ls(rng);
  const GpcaProblem hu = make_huber(rng);
  for (const GpcaProblem* p : {&ls, &hu}) {
    for (int trial = 0; trial < 3; ++trial) {
      const ProductPoint x = random_feasible(*p, rng);
      for (int i = 0; i < p->num_blocks(); ++i) {
        const VectorXd g = p->partial_grad(i, x);
        const VectorXd fd = finite_diff_gradient(
            [&](const VectorXd& v) { return p->value(with_block(x, i, v)); }, x.block(i));
        EXPECT_LT((g - fd).norm(), 1e-5 * (1.0 + fd.norm()))
            << p->name() << " block " << i;
      }
    }
  }
}

TEST(GpcaProblemT, ExactMinMatchesEigOracleAndBeatsSamples) {
  Rng rng(13);
  const GpcaProblem p = make_ls(rng);
  const ProductPoint x = random_feasible(p, rng);
  for (int i = 0; i < p.num_blocks(); ++i) {
    ASSERT_TRUE(p.has_exact_min(i));
    const BlockResult r = p.exact_min(i, x);
    EXPECT_FALSE(r.degenerate);
    const Feasibility f = is_feasible(p.block_spec(i), r.point);
    EXPECT_TRUE(f.feasible) << f.violation;
    const double fmin = p.value(with_block(x, i, r.point));
    EXPECT_LE(fmin, p.value(x) + 1e-12);

    // Oracle: the weighted partial objective is tr(A^T W A); its Stiefel
    // minimum is the sum of the smallest c_i eigenvalues of W.
    const VectorXd w = p.weights(i, x);
    MatrixXd scatter = MatrixXd::Zero(4, 4);
    for (int j = 0; j < p.num_points(); ++j)
      scatter += w[j] * p.points().col(j) * p.points().col(j).transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(scatter);
    const int c = p.block_spec(i).ambient_dim() / 4;
    const double partial_min = es.eigenvalues().head(c).sum();
    // F(exact) = partial objective at min; off-block terms are inside w.
    EXPECT_NEAR(fmin, partial_min, 1e-10 * (1.0 + std::abs(partial_min)));

    for (int k = 0; k < 300; ++k) {
      const VectorXd cand = random_point(p.block_spec(i), rng);
      EXPECT_LE(fmin, p.value(with_block(x, i, cand)) + 1e-10);
    }
  }
}

TEST(GpcaProblemT, LeastSquaresHasNoMajorizerHuberHasNoExactMin) {
  Rng rng(14);
  const GpcaProblem ls = make_ls(rng);
  const GpcaProblem hu = make_huber(rng);
  EXPECT_FALSE(ls.has_majorizer(0));
  EXPECT_THROW(ls.majorizer(0), unsupported_operation);
  EXPECT_FALSE(hu.has_exact_min(0));
  EXPECT_THROW(hu.exact_min(0, random_feasible(hu, rng)), unsupported_operation);
  EXPECT_TRUE(hu.has_majorizer(1));
}

TEST(GpcaProblemT, MajorizerAnchorsDominatesAndDescends) {
  Rng rng(15);
  const GpcaProblem p = make_huber(rng);
  for (int trial = 0; trial < 3; ++trial) {
    const ProductPoint z = random_feasible(p, rng);
    for (int i = 0; i < p.num_blocks(); ++i) {
      const Majorizer& maj = p.majorizer(i);
      // Anchor equality: G(z_i, z) = F(z).
      EXPECT_NEAR(maj.value(z.block(i), z), p.value(z), 1e-11 * (1.0 + p.value(z)));
      // Domination over random feasible block points.
      for (int k = 0; k < 100; ++k) {
        const VectorXd xi = random_point(p.block_spec(i), rng);
        const double g = maj.value(xi, z);
        const double f = p.value(with_block(z, i, xi));
        EXPECT_GE(g - f, -1e-10 * (1.0 + std::abs(f)));
      }
      // First-argument gradient matches finite differences.
      const VectorXd xi0 = random_point(p.block_spec(i), rng);
      const VectorXd g = maj.grad_first(xi0, z);
      const VectorXd fd = finite_diff_gradient(
          [&](const VectorXd& v) { return maj.value(v, z); }, xi0);
      EXPECT_LT((g - fd).norm(), 1e-5 * (1.0 + fd.norm()));
      // Tangency: at the anchor the majorizer gradient equals the partial.
      EXPECT_LT((maj.grad_first(z.block(i), z) - p.partial_grad(i, z)).norm(),
                1e-9 * (1.0 + p.partial_grad(i, z).norm()));
      // Minimize step descends F through the surrogate sandwich.
      const VectorXd xmin = maj.minimize(z);
      EXPECT_TRUE(is_feasible(p.block_spec(i), xmin).feasible);
      EXPECT_LE(maj.value(xmin, z), maj.value(z.block(i), z) + 1e-12);
      EXPECT_LE(p.value(with_block(z, i, xmin)), p.value(z) + 1e-11 * (1.0 + p.value(z)));
      // And beats random candidates on the surrogate itself.
      for (int k = 0; k < 100; ++k) {
        const VectorXd xi = random_point(p.block_spec(i), rng);
        EXPECT_LE(maj.value(xmin, z), maj.value(xi, z) + 1e-10);
      }
    }
  }
}

TEST(GpcaGenerator, PlantedFramesAnnihilate) {
  Rng rng(16);
  const std::vector<int> c = {2, 2};
  const auto gen = generate_gpca(4, 50, c, 0.0, 0.0, rng);
  const GpcaProblem p("g", gen.points, c, GpcaLoss::LeastSquares);
  std::vector<VectorXd> blocks;
  for (const auto& f : gen.truth.frames) blocks.push_back(as_vector(f));
  const ProductPoint planted = product_pack(p.blocks(), blocks);
  EXPECT_LE(p.value(planted), 1e-18);
  for (const int a : gen.truth.assignment) {
    EXPECT_GE(a, 0);
    EXPECT_LT(a, 2);
  }
}

TEST(GpcaGenerator, OutlierCountAndUnitScale) {
  Rng rng(17);
  const auto gen = generate_gpca(5, 40, {2}, 0.0, 0.25, rng);
  int outliers = 0;
  for (const int a : gen.truth.assignment) outliers += a < 0 ? 1 : 0;
  EXPECT_EQ(outliers, 10);
  for (int j = outliers; j < 40; ++j) EXPECT_NEAR(gen.points.col(j).norm(), 1.0, 1e-12);
}

}  // namespace
}  // namespace mbcd
