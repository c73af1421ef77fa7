#include <gtest/gtest.h>

#include <set>

#include "mbcd/manifolds.hpp"

using namespace mbcd;

namespace {

std::vector<ManifoldSpec> smooth_zoo() {
  return {
      ManifoldSpec::euclidean(4),
      ManifoldSpec::sphere(3),
      ManifoldSpec::sphere(1),
      ManifoldSpec::stiefel(4, 2),
      ManifoldSpec::stiefel(3, 3),
      ManifoldSpec::special_orthogonal(3),
      ManifoldSpec::oblique(3, 4),
      ManifoldSpec::affine(VectorXd::Zero(3), (MatrixXd(3, 1) << 1, 0, 0).finished()),
      ManifoldSpec::product({ManifoldSpec::special_orthogonal(3), ManifoldSpec::euclidean(3)}),
  };
}

std::vector<ManifoldSpec> full_zoo() {
  auto zoo = smooth_zoo();
  VectorXd lo(3), hi(3);
  lo << 0, -1, 2;
  hi << 1, 1, 2.5;
  zoo.push_back(ManifoldSpec::box(lo, hi));
  zoo.push_back(ManifoldSpec::finite_set(std::make_shared<PermutationDomain>(4)));
  zoo.push_back(ManifoldSpec::finite_set(std::make_shared<SignDomain>(3)));
  zoo.push_back(ManifoldSpec::finite_set(std::make_shared<SignedPermutationDomain>(3)));
  return zoo;
}

}  // namespace

TEST(ManifoldSpec, ValidationRejectsBadParameters) {
  EXPECT_THROW(ManifoldSpec::euclidean(0), std::invalid_argument);
  EXPECT_THROW(ManifoldSpec::stiefel(2, 3), std::invalid_argument);
  EXPECT_THROW(ManifoldSpec::box(VectorXd::Ones(2), VectorXd::Zero(2)), std::invalid_argument);
  EXPECT_THROW(ManifoldSpec::box(VectorXd::Zero(2), VectorXd::Zero(3)), std::invalid_argument);
  // Non-orthonormal basis.
  EXPECT_THROW(ManifoldSpec::affine(VectorXd::Zero(2), 2.0 * MatrixXd::Identity(2, 2)),
               std::invalid_argument);
  EXPECT_THROW(ManifoldSpec::finite_set(nullptr), std::invalid_argument);
  EXPECT_THROW(ManifoldSpec::product({}), std::invalid_argument);
  EXPECT_THROW(PermutationDomain{25}, std::invalid_argument);
}

TEST(ManifoldSpec, DimensionsAndFlags) {
  EXPECT_EQ(ManifoldSpec::euclidean(4).ambient_dim(), 4);
  EXPECT_EQ(ManifoldSpec::sphere(3).dim(), 2);
  EXPECT_EQ(ManifoldSpec::stiefel(4, 2).ambient_dim(), 8);
  EXPECT_EQ(ManifoldSpec::stiefel(4, 2).dim(), 5);  // 4*2 - 2*3/2
  EXPECT_EQ(ManifoldSpec::special_orthogonal(3).dim(), 3);
  EXPECT_EQ(ManifoldSpec::oblique(3, 4).dim(), 8);

  const auto se3 =
      ManifoldSpec::product({ManifoldSpec::special_orthogonal(3), ManifoldSpec::euclidean(3)});
  EXPECT_EQ(se3.ambient_dim(), 12);
  EXPECT_EQ(se3.dim(), 6);
  EXPECT_TRUE(se3.smooth());
  EXPECT_EQ(se3.describe(), "Product(SO(3) x Euclidean(3))");

  EXPECT_FALSE(ManifoldSpec::box(VectorXd::Zero(2), VectorXd::Ones(2)).smooth());
  const auto fs = ManifoldSpec::finite_set(std::make_shared<PermutationDomain>(3));
  EXPECT_FALSE(fs.smooth());
  EXPECT_EQ(fs.ambient_dim(), 9);
  EXPECT_EQ(fs.dim(), 0);
  EXPECT_FALSE(
      ManifoldSpec::product({ManifoldSpec::sphere(2),
                             ManifoldSpec::box(VectorXd::Zero(1), VectorXd::Ones(1))})
          .smooth());
}

TEST(Manifolds, RandomPointsAreFeasible) {
  Rng rng(101);
  for (const auto& spec : full_zoo()) {
    for (int k = 0; k < 25; ++k) {
      const VectorXd x = random_point(spec, rng);
      const auto f = is_feasible(spec, x);
      EXPECT_TRUE(f.feasible) << spec.describe() << " violation " << f.violation;
    }
  }
}

TEST(Manifolds, FeasibilityViolationMetrics) {
  Rng rng(103);
  const auto sphere = ManifoldSpec::sphere(3);
  VectorXd x = random_point(sphere, rng);
  EXPECT_NEAR(is_feasible(sphere, VectorXd(1.01 * x)).violation, 0.01, 1e-12);
  EXPECT_FALSE(is_feasible(sphere, VectorXd(1.01 * x)).feasible);

  VectorXd lo = VectorXd::Zero(2), hi = VectorXd::Ones(2);
  const auto box = ManifoldSpec::box(lo, hi);
  VectorXd inside(2), outside(2);
  inside << 0.5, 1.0;
  outside << -0.25, 0.5;
  EXPECT_TRUE(is_feasible(box, inside).feasible);
  EXPECT_NEAR(is_feasible(box, outside).violation, 0.25, 1e-12);

  VectorXd nanpt = VectorXd::Constant(3, std::nan(""));
  EXPECT_FALSE(is_feasible(sphere, nanpt).feasible);

  EXPECT_THROW(is_feasible(sphere, VectorXd::Zero(4)), std::invalid_argument);
}

TEST(Manifolds, TangentProjectionIsOrthogonalProjector) {
  Rng rng(107);
  for (const auto& spec : smooth_zoo()) {
    for (int k = 0; k < 10; ++k) {
      const VectorXd x = random_point(spec, rng);
      const VectorXd v = rng.gaussian_vector(spec.ambient_dim());
      const VectorXd pv = project_tangent(spec, x, v);
      // Idempotent.
      EXPECT_LT((project_tangent(spec, x, pv) - pv).norm(), 1e-10) << spec.describe();
      // Residual orthogonal to the tangent space.
      const VectorXd w = rng.gaussian_vector(spec.ambient_dim());
      const VectorXd pw = project_tangent(spec, x, w);
      EXPECT_LT(std::abs((v - pv).dot(pw)), 1e-9) << spec.describe();
      // Linear.
      const VectorXd sum = project_tangent(spec, x, VectorXd(v + 2.0 * w));
      EXPECT_LT((sum - pv - 2.0 * pw).norm(), 1e-9) << spec.describe();
    }
  }
}

TEST(Manifolds, TangentVectorsAreCurveVelocities) {
  // Structural tangency: <x, v> = 0 on the sphere, sym(X^T V) = 0 on Stiefel,
  // X^T V skew on SO(d), columnwise on oblique.
  Rng rng(109);
  const auto sph = ManifoldSpec::sphere(4);
  VectorXd x = random_point(sph, rng);
  VectorXd pv = project_tangent(sph, x, rng.gaussian_vector(4));
  EXPECT_LT(std::abs(x.dot(pv)), 1e-12);

  const auto st = ManifoldSpec::stiefel(4, 2);
  x = random_point(st, rng);
  pv = project_tangent(st, x, rng.gaussian_vector(8));
  const auto xm = as_matrix(x, 4, 2);
  const auto vm = as_matrix(pv, 4, 2);
  const MatrixXd symm = xm.transpose() * vm + vm.transpose() * xm;
  EXPECT_LT(symm.cwiseAbs().maxCoeff(), 1e-12);

  const auto so = ManifoldSpec::special_orthogonal(3);
  x = random_point(so, rng);
  pv = project_tangent(so, x, rng.gaussian_vector(9));
  const MatrixXd a = as_matrix(x, 3, 3).transpose() * as_matrix(pv, 3, 3);
  EXPECT_LT((a + a.transpose()).cwiseAbs().maxCoeff(), 1e-12);

  EXPECT_THROW(
      project_tangent(ManifoldSpec::box(VectorXd::Zero(2), VectorXd::Ones(2)),
                      VectorXd::Constant(2, 0.5), VectorXd::Ones(2)),
      unsupported_operation);
}

TEST(Manifolds, RetractionsStayFeasibleAndFixZero) {
  Rng rng(113);
  for (const auto& spec : smooth_zoo()) {
    for (int k = 0; k < 10; ++k) {
      const VectorXd x = random_point(spec, rng);
      EXPECT_LT((retract(spec, x, VectorXd::Zero(spec.ambient_dim())) - x).norm(), 1e-12)
          << spec.describe();
      const VectorXd t = random_tangent(spec, x, rng);
      const VectorXd y = retract(spec, x, VectorXd(0.7 * t));
      EXPECT_TRUE(is_feasible(spec, y).feasible) << spec.describe();
    }
  }
}

TEST(Manifolds, RetractionIsSecondOrderAccurate) {
  // ||retr_x(t v) - (x + t v)|| = O(t^2): the ratio to t^2 stays bounded as
  // t shrinks, which also certifies retr_x(tv) = x + tv + o(t).
  Rng rng(127);
  for (const auto& spec : smooth_zoo()) {
    const VectorXd x = random_point(spec, rng);
    const VectorXd v = random_tangent(spec, x, rng);
    double prev_ratio = -1.0;
    for (const double t : {1e-2, 1e-3, 1e-4}) {
      const VectorXd y = retract(spec, x, VectorXd(t * v));
      const double ratio = (y - x - t * v).norm() / (t * t);
      EXPECT_LT(ratio, 10.0) << spec.describe();
      if (prev_ratio >= 0.0) EXPECT_LT(ratio, prev_ratio + 1.0) << spec.describe();
      prev_ratio = ratio;
    }
  }
}

TEST(Manifolds, SphereRetractionClosedForm) {
  Rng rng(131);
  const auto sph = ManifoldSpec::sphere(5);
  const VectorXd x = random_point(sph, rng);
  const VectorXd v = random_tangent(sph, x, rng);
  const VectorXd y = retract(sph, x, v);
  EXPECT_LT((y - (x + v).normalized()).norm(), 1e-14);
  // A tangent step cannot reach the center, but an ambient -x does.
  EXPECT_THROW(retract(sph, x, VectorXd(-x)), degenerate_error);
}

TEST(Manifolds, ProductOpsSplitPerFactor) {
  Rng rng(137);
  const auto so3 = ManifoldSpec::special_orthogonal(3);
  const auto e3 = ManifoldSpec::euclidean(3);
  const auto se3 = ManifoldSpec::product({so3, e3});
  const VectorXd x = random_point(se3, rng);
  const VectorXd v = rng.gaussian_vector(12);
  const VectorXd pv = project_tangent(se3, x, v);
  EXPECT_LT((pv.head(9) - project_tangent(so3, VectorXd(x.head(9)), VectorXd(v.head(9)))).norm(),
            1e-14);
  EXPECT_LT((pv.tail(3) - v.tail(3)).norm(), 1e-14);
  const VectorXd y = retract(se3, x, pv);
  EXPECT_LT((y.head(9) - retract(so3, VectorXd(x.head(9)), VectorXd(pv.head(9)))).norm(), 1e-14);
  EXPECT_TRUE(is_feasible(se3, y).feasible);
}

TEST(Manifolds, ReprojectRestoresFeasibility) {
  Rng rng(139);
  for (const auto& spec : full_zoo()) {
    const VectorXd x = random_point(spec, rng);
    VectorXd drifted = x;
    if (spec.smooth() || spec.get_if<Box>() != nullptr) {
      drifted += 1e-6 * rng.gaussian_vector(spec.ambient_dim());
    }
    const VectorXd back = reproject(spec, drifted);
    EXPECT_TRUE(is_feasible(spec, back).feasible) << spec.describe();
    EXPECT_LT((back - x).norm(), 1e-4) << spec.describe();
  }
}

TEST(Manifolds, AffineReprojectIsMetricProjection) {
  Rng rng(149);
  const VectorXd c = rng.gaussian_vector(4);
  const MatrixXd b = polar_orthogonal_factor(rng.gaussian_matrix(4, 2));
  const auto aff = ManifoldSpec::affine(c, b);
  const VectorXd z = rng.gaussian_vector(4);
  const VectorXd proj = reproject(aff, z);
  // Oracle: nearest point solves min_w ||c + B w - z||.
  const VectorXd w = least_squares(b, VectorXd(z - c));
  EXPECT_LT((proj - (c + b * w)).norm(), 1e-12);
  EXPECT_TRUE(is_feasible(aff, proj).feasible);
}

TEST(FiniteSets, ElementsEnumerateDistinctAndFeasible) {
  const PermutationDomain perm(4);
  EXPECT_EQ(perm.size(), 24u);
  std::set<std::string> seen;
  for (std::uint64_t i = 0; i < perm.size(); ++i) {
    const VectorXd e = perm.element(i);
    EXPECT_NEAR(perm.violation(e), 0.0, 0.0);
    std::ostringstream key;
    key << e.transpose();
    seen.insert(key.str());
  }
  EXPECT_EQ(seen.size(), 24u);

  const SignDomain sign(3);
  EXPECT_EQ(sign.size(), 8u);
  for (std::uint64_t i = 0; i < sign.size(); ++i)
    EXPECT_NEAR(sign.violation(sign.element(i)), 0.0, 0.0);

  const SignedPermutationDomain sp(3);
  EXPECT_EQ(sp.size(), 48u);
  std::set<std::string> sp_seen;
  for (std::uint64_t i = 0; i < sp.size(); ++i) {
    const VectorXd e = sp.element(i);
    EXPECT_NEAR(sp.violation(e), 0.0, 0.0);
    std::ostringstream key;
    key << e.transpose();
    sp_seen.insert(key.str());
  }
  EXPECT_EQ(sp_seen.size(), 48u);
}

TEST(FiniteSets, PermutationSemantics) {
  // Column convention: P e_j = e_{perm[j]}, so (P y)_{perm[j]} = y_j.
  const PermutationDomain perm(3);
  Rng rng(151);
  const VectorXd e = perm.sample(rng);
  const auto p = as_matrix(e, 3, 3);
  const VectorXd y = rng.gaussian_vector(3);
  const VectorXd py = p * y;
  std::multiset<double> a(y.data(), y.data() + 3), bb(py.data(), py.data() + 3);
  EXPECT_EQ(a, bb);
  // Orthogonality (needed for the sensing block solves).
  EXPECT_LT((p.transpose() * p - MatrixXd::Identity(3, 3)).norm(), 1e-14);

  Rng rng2(152);
  const SignedPermutationDomain sp(4);
  const VectorXd sv = sp.sample(rng2);
  const auto sm = as_matrix(sv, 4, 4);
  EXPECT_LT((sm.transpose() * sm - MatrixXd::Identity(4, 4)).norm(), 1e-14);
}

TEST(ProductPoint, PackUnpackRoundTrip) {
  Rng rng(157);
  const std::vector<ManifoldSpec> specs = {ManifoldSpec::stiefel(4, 2), ManifoldSpec::sphere(3)};
  std::vector<VectorXd> blocks = {random_point(specs[0], rng), random_point(specs[1], rng)};
  const ProductPoint p = product_pack(specs, blocks);
  const auto& views = product_unpack(p);
  ASSERT_EQ(views.size(), 2u);
  EXPECT_EQ(views[0], blocks[0]);
  EXPECT_EQ(views[1], blocks[1]);
  EXPECT_TRUE(is_feasible(specs, p).feasible);

  EXPECT_THROW(product_pack(specs, {blocks[0]}), std::invalid_argument);
  EXPECT_THROW(product_pack(specs, {blocks[1], blocks[0]}), std::invalid_argument);
}
