#include <gtest/gtest.h>

#include "mbcd/diagnostics.hpp"
#include "mbcd/problems/registry.hpp"

namespace mbcd {
namespace {

// Coupled two-block quadratic with known constants: the block-1 partial
// gradient is 2-Lipschitz in its own block, and the (flat) retraction descent
// constant is exactly 2 as well.
class QuadProblem : public Problem {
 public:
  QuadProblem()
      : Problem("quad", {ManifoldSpec::euclidean(2), ManifoldSpec::euclidean(2)}) {
    a_.resize(2);
    b_.resize(2);
    a_ << 1.0, 0.0;
    b_ << 0.0, 1.0;
  }
  double value(const ProductPoint& x) const override {
    return (x.block(0) - a_).squaredNorm() + (x.block(1) - b_).squaredNorm() +
           x.block(0).dot(x.block(1));
  }
  VectorXd partial_grad(int i, const ProductPoint& x) const override {
    if (i == 0) return 2.0 * (x.block(0) - a_) + x.block(1);
    return 2.0 * (x.block(1) - b_) + x.block(0);
  }
  bool has_exact_min(int) const override { return true; }
  BlockResult exact_min(int i, const ProductPoint& x) const override {
    if (i == 0) return {a_ - 0.5 * x.block(1), false};
    return {b_ - 0.5 * x.block(0), false};
  }
  bool has_majorizer(int i) const override { return i == 0; }
  const Majorizer& majorizer(int i) const override {
    require(i == 0, "quad: majorizer is block 1 only");
    return m_;
  }

 private:
  VectorXd a_, b_;
  RestrictionMajorizer m_{*this, 0};
};

// Wrapper that inflates one block's reported gradient: gradcheck must flag it.
class BrokenGradProblem : public Problem {
 public:
  BrokenGradProblem() : Problem("broken-grad", {ManifoldSpec::euclidean(2)}) {}
  double value(const ProductPoint& x) const override { return x.block(0).squaredNorm(); }
  VectorXd partial_grad(int, const ProductPoint& x) const override {
    return 2.2 * x.block(0);  // true gradient is 2 x
  }
};

// Surrogate that dips below the objective away from its anchor.
class UndercutMajorizer : public Majorizer {
 public:
  explicit UndercutMajorizer(const Problem& p) : p_(&p) {}
  double value(const VectorXd& xi, const ProductPoint& z) const override {
    const double d = (xi - z.block(0)).norm();
    return p_->value(with_block(z, 0, xi)) - 0.5 * d;
  }
  VectorXd grad_first(const VectorXd& xi, const ProductPoint& z) const override {
    return p_->partial_grad(0, with_block(z, 0, xi));
  }
  VectorXd minimize(const ProductPoint& z) const override { return z.block(0); }

 private:
  const Problem* p_;
};

class UndercutProblem : public Problem {
 public:
  UndercutProblem() : Problem("undercut", {ManifoldSpec::euclidean(2)}) {}
  double value(const ProductPoint& x) const override { return x.block(0).squaredNorm(); }
  VectorXd partial_grad(int, const ProductPoint& x) const override { return 2.0 * x.block(0); }
  bool has_majorizer(int) const override { return true; }
  const Majorizer& majorizer(int) const override { return m_; }

 private:
  UndercutMajorizer m_{*this};
};

TEST(Sampling, BoxFloorClampsLowerBound) {
  const ManifoldSpec box = ManifoldSpec::box(VectorXd::Constant(3, -1.0), VectorXd::Ones(3));
  Rng rng(5);
  double lowest = 1.0;
  for (int k = 0; k < 200; ++k)
    lowest = std::min(lowest, sample_block_point(box, rng, 1e-2).minCoeff());
  EXPECT_GE(lowest, 1e-2);
  EXPECT_LE(lowest, 0.2);  // floor is tight, not a large offset

  Rng rng2(5);
  double unfloored = 1.0;
  for (int k = 0; k < 200; ++k)
    unfloored = std::min(unfloored, sample_block_point(box, rng2, 0.0).minCoeff());
  EXPECT_LT(unfloored, 0.0);
}

TEST(Estimators, ExactOnQuadraticAtUnitSafety) {
  const QuadProblem p;
  EXPECT_NEAR(estimate_block_lipschitz(p, 0, 100, 3, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(estimate_block_lipschitz(p, 1, 100, 3, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(estimate_tilde_L(p, 0, 100, 3, 1.0), 2.0, 1e-4);
  // The surrogate is the objective's own restriction, so its constants match.
  EXPECT_NEAR(estimate_surrogate_lipschitz(p, 0, 100, 3, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(estimate_tilde_L_surrogate(p, 0, 100, 3, 1.0), 2.0, 1e-4);
}

TEST(Estimators, SafetyFactorScalesTheRawMaximum) {
  const QuadProblem p;
  const double raw = estimate_block_lipschitz(p, 0, 50, 9, 1.0);
  const double inflated = estimate_block_lipschitz(p, 0, 50, 9);
  EXPECT_DOUBLE_EQ(inflated, 1.2 * raw);
}

TEST(Estimators, FlatRetractionConstantsAreAnalytic) {
  const RetractionConstants rc =
      estimate_retraction_constants(ManifoldSpec::euclidean(4), 10, 1);
  EXPECT_DOUBLE_EQ(rc.alpha, 1.0);
  EXPECT_DOUBLE_EQ(rc.beta, 0.0);
}

TEST(Estimators, SphereRetractionShrinksSteps) {
  const RetractionConstants rc =
      estimate_retraction_constants(ManifoldSpec::sphere(5), 400, 2, 1.0);
  EXPECT_LE(rc.alpha, 1.0 + 1e-9);  // projective retraction never overshoots
  EXPECT_GE(rc.alpha, 0.9);         // and approaches an isometry for short steps
  EXPECT_GE(rc.beta, 0.3);          // curvature correction near 1/2
  EXPECT_LE(rc.beta, 1.0);
}

TEST(Estimators, FixedSeedEstimatesGrowWithSamples) {
  const BuiltProblem bp = build_problem("gpca-ls", {}, 6);
  const Problem& p = *bp.problem;
  EXPECT_LE(estimate_block_lipschitz(p, 0, 40, 11), estimate_block_lipschitz(p, 0, 400, 11));
  EXPECT_LE(estimate_tilde_L(p, 0, 40, 11), estimate_tilde_L(p, 0, 400, 11));
  const RetractionConstants small =
      estimate_retraction_constants(p.block_spec(0), 40, 11);
  const RetractionConstants big = estimate_retraction_constants(p.block_spec(0), 400, 11);
  EXPECT_LE(small.alpha, big.alpha);
  EXPECT_LE(small.beta, big.beta);
}

TEST(Estimators, RejectNonSmoothBlocks) {
  const BuiltProblem hs = build_problem("hs-perm", {}, 1);
  EXPECT_THROW(estimate_block_lipschitz(*hs.problem, 1, 10, 1), unsupported_operation);
  EXPECT_THROW(estimate_tilde_L(*hs.problem, 1, 10, 1), std::invalid_argument);
  EXPECT_THROW(estimate_retraction_constants(hs.problem->block_spec(1), 10, 1),
               unsupported_operation);
}

TEST(SmoothnessReport, CoversAllBlocksWithCapabilityAwareFields) {
  const BuiltProblem bp = build_problem("gpca-huber", {}, 2);
  const SmoothnessReport rep = estimate_smoothness(*bp.problem, 30, 4);
  ASSERT_EQ(rep.blocks.size(), static_cast<std::size_t>(bp.problem->num_blocks()));
  for (const BlockSmoothness& bs : rep.blocks) {
    EXPECT_TRUE(std::isfinite(bs.lipschitz));
    EXPECT_TRUE(std::isfinite(bs.descent));
    EXPECT_TRUE(std::isfinite(bs.alpha));
    EXPECT_TRUE(std::isfinite(bs.surrogate_descent));  // every block has a surrogate
    EXPECT_EQ(bs.samples, 30);
  }

  const BuiltProblem hs = build_problem("hs-perm", {}, 2);
  const SmoothnessReport hrep = estimate_smoothness(*hs.problem, 10, 4);
  EXPECT_TRUE(std::isfinite(hrep.blocks[0].lipschitz));
  EXPECT_TRUE(std::isnan(hrep.blocks[1].lipschitz));  // finite-set block
  EXPECT_TRUE(std::isnan(hrep.blocks[1].descent));
}

TEST(RateConstant, MatchesHandComputedFormula) {
  SmoothnessReport rep;
  BlockSmoothness bs;
  bs.lipschitz = 2.0;
  bs.descent = 2.0;
  bs.alpha = 1.0;
  rep.blocks = {bs, bs};
  // sqrt(2 * 2) + 1 * 2 * sqrt(2 * 1 / 2) = 4 over one block,
  // sqrt(2 * 2) + 1 * 2 * sqrt(2 * 2 / 2) = 2 + 2 sqrt(2) over two.
  EXPECT_DOUBLE_EQ(compute_rate_constant(rep, 1), 4.0);
  EXPECT_DOUBLE_EQ(compute_rate_constant(rep, 2), 2.0 + 2.0 * std::sqrt(2.0));

  rep.blocks[1].descent = 8.0;
  EXPECT_DOUBLE_EQ(compute_rate_constant(rep, 2), 4.0 + 2.0 * std::sqrt(2.0));

  rep.blocks[0].surrogate_descent = 2.0;
  rep.blocks[1].surrogate_descent = 2.0;
  EXPECT_DOUBLE_EQ(compute_rate_constant(rep, 2, true), 2.0 + 2.0 * std::sqrt(2.0));

  SmoothnessReport missing = rep;
  missing.blocks[0].descent = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(compute_rate_constant(missing, 2), std::invalid_argument);
  EXPECT_THROW(compute_rate_constant(rep, 3), std::invalid_argument);
}

RunTrace gradient_run(const Problem& p, int sweeps, std::uint64_t seed) {
  SolverSchedule s =
      uniform_schedule(p.num_blocks(), BlockRule::rgd(StepPolicy::inverse_smoothness(2.0)));
  s.stop.max_sweeps = sweeps;
  return run_from_seed(p, s, seed);
}

TEST(Certificate, PassesOnGradientDescentRun) {
  const QuadProblem p;
  const RunTrace tr = gradient_run(p, 40, 21);
  const SmoothnessReport rep = estimate_smoothness(p, 100, 21);
  const double c = compute_rate_constant(rep, 2);
  const RateCertificate cert = certify_rate(tr, c, RateMode::AllRgd);
  EXPECT_TRUE(cert.pass);
  EXPECT_EQ(cert.scope_blocks, 2);
  EXPECT_EQ(cert.checks.size(), 40u);
  EXPECT_LE(cert.worst_margin, 1e-8);
  for (const PrefixCheck& ck : cert.checks) EXPECT_LE(ck.lhs, ck.rhs + 1e-8);
}

TEST(Certificate, FailsOnInflatedStationarityRecords) {
  const QuadProblem p;
  RunTrace tr = gradient_run(p, 40, 21);
  for (TraceRecord& r : tr.records)
    if (r.i == 0) r.grad *= 10.0;  // corrupt the recorded stationarity
  const SmoothnessReport rep = estimate_smoothness(p, 100, 21);
  const RateCertificate cert = certify_rate(tr, compute_rate_constant(rep, 2), RateMode::AllRgd);
  EXPECT_FALSE(cert.pass);
  EXPECT_GT(cert.worst_margin, 0.0);
}

TEST(Certificate, BlendedModeUsesLeadingBlocks) {
  const QuadProblem p;
  SolverSchedule s = blended_schedule(2, {0}, StepPolicy::inverse_smoothness(2.0));
  s.stop.max_sweeps = 40;
  const RunTrace tr = run_from_seed(p, s, 22);
  const SmoothnessReport rep = estimate_smoothness(p, 100, 22);
  const double c = compute_rate_constant(rep, 1);  // constants over the leading block
  const RateCertificate cert = certify_rate(tr, c, RateMode::Blended);
  EXPECT_TRUE(cert.pass);
  EXPECT_EQ(cert.scope_blocks, 1);
}

TEST(Certificate, ModeMismatchIsRejected) {
  const QuadProblem p;
  SolverSchedule em = uniform_schedule(2, BlockRule::exact_min());
  em.stop.max_sweeps = 5;
  const RunTrace emt = run_from_seed(p, em, 3);
  EXPECT_THROW(certify_rate(emt, 4.0, RateMode::AllRgd), std::invalid_argument);
  EXPECT_THROW(certify_rate(emt, 4.0, RateMode::Surrogate), std::invalid_argument);
  EXPECT_THROW(certify_rate(gradient_run(p, 5, 3), 4.0, RateMode::Blended),
               std::invalid_argument);
}

TEST(Certificate, NeedsACompletedSweep) {
  const QuadProblem p;
  SolverSchedule s =
      uniform_schedule(2, BlockRule::rgd(StepPolicy::inverse_smoothness(2.0)));
  s.stop.max_sweeps = 0;
  const RunTrace tr = run_from_seed(p, s, 2);
  EXPECT_THROW(certify_rate(tr, 4.0, RateMode::AllRgd), std::invalid_argument);
}

TEST(Certificate, EscalationSettlesOnFirstPass) {
  const QuadProblem p;
  const RunTrace tr = gradient_run(p, 20, 31);
  const CertifyOutcome oc = certify_with_escalation(p, tr, RateMode::AllRgd, 50, 31);
  EXPECT_TRUE(oc.certificate.pass);
  EXPECT_EQ(oc.samples_used, 50);
  EXPECT_GT(oc.c_constant, 0.0);
}

TEST(Gradcheck, PassesOnLibraryProblems) {
  for (const char* name : {"gpca-ls", "gpca-huber", "irls-gm", "bm-maxcut", "essential"}) {
    const BuiltProblem bp = build_problem(name, {}, 3);
    const GradcheckReport rep = gradcheck(*bp.problem, 20, 7);
    EXPECT_TRUE(rep.pass) << name << ": max rel error " << rep.max_rel_error;
    EXPECT_EQ(rep.checked_blocks, bp.problem->num_blocks()) << name;
  }
}

TEST(Gradcheck, FlagsCorruptedGradients) {
  const BrokenGradProblem p;
  const GradcheckReport rep = gradcheck(p, 20, 7);
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.worst_block, 0);
  EXPECT_GT(rep.max_rel_error, 1e-2);
}

TEST(MajorizerAudit, PassesOnLibrarySurrogates) {
  const BuiltProblem gh = build_problem("gpca-huber", {}, 5);
  for (int i = 0; i < gh.problem->num_blocks(); ++i) {
    const MajorizerAudit rep = majorizer_audit(*gh.problem, i, 200, 13);
    EXPECT_TRUE(rep.pass) << "gpca-huber block " << i << ": slack " << rep.worst_slack
                          << ", anchor " << rep.worst_anchor_gap << ", tangency "
                          << rep.worst_tangency;
  }
  const BuiltProblem ir = build_problem("irls-gm", {}, 5);
  const MajorizerAudit rep = majorizer_audit(*ir.problem, 1, 200, 13);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.worst_slack, 0.0);  // restriction surrogate dominates with equality
}

TEST(MajorizerAudit, FlagsAnUndercuttingSurrogate) {
  const UndercutProblem p;
  const MajorizerAudit rep = majorizer_audit(p, 0, 200, 13);
  EXPECT_FALSE(rep.pass);
  EXPECT_LT(rep.worst_slack, -1e-6);
}

}  // namespace
}  // namespace mbcd
