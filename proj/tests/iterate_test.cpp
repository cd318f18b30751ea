#include "altproj/iterate.hpp"
#include "instances.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace altproj;
using inst::p2;

namespace {

const SetPtr kBall = make_ball(p2(0, 0), 1.0);
const SetPtr kXAxis = make_affine_subspace(p2(0, 0), {p2(1, 0)});

bool same_trace(const IterationTrace& a, const IterationTrace& b) {
  if (a.steps.size() != b.steps.size() || a.converged != b.converged) return false;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    if (a.steps[k].x != b.steps[k].x || a.steps[k].tag != b.steps[k].tag) return false;
    if (a.steps[k].step != b.steps[k].step) return false;
  }
  return true;
}

// Tangential offsets t of a = foot + t e1 admissible for x = (x1, d) against the
// first axis, by scanning t.
std::pair<double, double> scan_line_interval(double d, double tau, double sigma) {
  double lo = kInf, hi = -kInf;
  for (int i = -200000; i <= 200000; ++i) {
    const double t = 4.0 * d * i / 200000.0;
    const double len = std::hypot(t, d);
    if (tau * len <= d && std::abs(t) <= sigma * len) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  return {lo, hi};
}

}  // namespace

TEST(Alternating, BallOntoItselfStopsAtBoundary) {
  const IterationTrace tr = alternating(*kBall, *kBall, p2(3, 0));
  ASSERT_TRUE(tr.converged);
  EXPECT_EQ(tr.projections(), 2u);
  EXPECT_NEAR((tr.steps[1].x - p2(1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((*tr.limit - p2(1, 0)).norm(), 0.0, 1e-15);
}

TEST(Alternating, TwoLinesFollowTheClassicalIteration) {
  const double phi = M_PI / 4;
  const oracle::Vec2 da(1, 0), db(std::cos(phi), std::sin(phi));
  const oracle::Vec2 x0(0.3, -0.7);
  const IterationTrace tr = alternating(*inst::line_at(0), *inst::line_at(45), p2(x0[0], x0[1]));
  ASSERT_TRUE(tr.converged);
  const auto ref = oracle::two_line_iterates(da, db, x0, static_cast<int>(tr.projections()));
  for (std::size_t k = 0; k < tr.steps.size(); ++k)
    EXPECT_NEAR((tr.steps[k].x - Point(ref[k])).norm(), 0.0, 1e-14) << k;
  // Full cycles contract by cos^2 45 = 0.5.
  for (std::size_t k = 3; k + 2 < tr.steps.size() && tr.steps[k + 2].x.norm() > 1e-10; k += 2)
    EXPECT_NEAR(tr.steps[k + 2].x.norm() / tr.steps[k].x.norm(), 0.5, 1e-3);
}

TEST(Alternating, TagsAlternateStartingWithB) {
  const IterationTrace tr = alternating(*inst::line_at(0), *inst::line_at(30), p2(1, 1));
  ASSERT_GT(tr.steps.size(), 3u);
  EXPECT_EQ(tr.steps[0].tag, Tag::start);
  for (std::size_t k = 1; k < tr.steps.size(); ++k) EXPECT_EQ(tr.steps[k].tag, k % 2 == 1 ? Tag::B : Tag::A);
}

TEST(Alternating, SawtoothAndDiagonalReachACommonPoint) {
  const SetPtr a = inst::sawtooth(), b = inst::diagonal();
  const IterationTrace tr = alternating(*a, *b, p2(0.4, 0.35), StopRule{1e-12, 100000});
  ASSERT_TRUE(tr.converged);
  EXPECT_LT(a->distance(*tr.limit), 1e-9);
  EXPECT_LT(b->distance(*tr.limit), 1e-9);
  EXPECT_TRUE(tr.certificates_ok());
}

TEST(Alternating, RayUnionsReachACommonPoint) {
  const SetPtr a = inst::rays_a(), b = inst::rays_b();
  for (const Point& x0 : {p2(0.3, 0.1), p2(0.2, -0.15), p2(0.05, 0.2)}) {
    const IterationTrace tr = alternating(*a, *b, x0);
    ASSERT_TRUE(tr.converged);
    EXPECT_LT(a->distance(*tr.limit), 1e-9);
    EXPECT_LT(b->distance(*tr.limit), 1e-9);
  }
}

TEST(Alternating, DeterministicAcrossRuns) {
  const SetPtr a = inst::sawtooth(), b = inst::diagonal();
  EXPECT_TRUE(same_trace(alternating(*a, *b, p2(0.4, 0.35)), alternating(*a, *b, p2(0.4, 0.35))));
  const StopRule stop;
  EXPECT_TRUE(same_trace(alternating(*a, *b, p2(0.3, 0.2), stop, TiePolicy::random, 7),
                         alternating(*a, *b, p2(0.3, 0.2), stop, TiePolicy::random, 7)));
}

TEST(Alternating, RandomTiePolicyPicksAmongTies) {
  // (0.5, 0.5) is equidistant from the ends (0, 1) and (1, 0) of two rays.
  const SetPtr pts = make_ray_union({{p2(0, 1), p2(0, 1)}, {p2(1, 0), p2(1, 0)}});
  const SetPtr line = make_affine_subspace(p2(0.5, 0.5), {p2(0, 1)});
  bool saw[2] = {false, false};
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    const IterationTrace tr = alternating(*pts, *line, p2(0.5, 0.5), StopRule{1e-12, 4}, TiePolicy::random, seed);
    const Point& a = tr.steps[2].x;
    saw[a[0] > 0.5 ? 1 : 0] = true;
  }
  EXPECT_TRUE(saw[0] && saw[1]);
  const IterationTrace lex = alternating(*pts, *line, p2(0.5, 0.5), StopRule{1e-12, 4});
  EXPECT_EQ(lex.steps[2].x, p2(0, 1));
}

TEST(Alternating, Errors) {
  EXPECT_THROW(alternating(*kBall, *kBall, p2(0, 0), StopRule{0.0, 10}), DomainError);
  EXPECT_THROW(alternating(*kBall, *kBall, make_point({1, 2, 3})), DomainError);
  EXPECT_THROW(alternating(*kBall, *kBall, p2(NAN, 0)), DomainError);
}

TEST(Alternating, NonConvergedRunStopsAtMaxIter) {
  const IterationTrace tr = alternating(*inst::line_at(0), *inst::line_at(5), p2(1, 1), StopRule{1e-12, 10});
  EXPECT_FALSE(tr.converged);
  EXPECT_FALSE(tr.limit.has_value());
  EXPECT_EQ(tr.projections(), 10u);
}

TEST(Alternating, ConvergedTailIsGeometric) {
  const IterationTrace tr = alternating(*inst::line_at(0), *inst::line_at(30), p2(0.2, 0.1));
  ASSERT_TRUE(tr.converged);
  const std::size_t n = tr.steps.size();
  ASSERT_GT(n, 44u);
  double sum = 0.0;
  for (std::size_t k = n - 41; k + 2 < n; k += 2) {
    EXPECT_LT(tr.steps[k + 2].step, tr.steps[k].step);
    sum += tr.steps[k].step;
  }
  EXPECT_LT(sum, 20 * tr.steps[n - 41].step);
}

TEST(TauSigmaProjection, ExactParametersGiveAProjectionPoint) {
  const SetPtr saw = inst::sawtooth();
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Point x = p2(rng.uniform(-0.2, 1.1), rng.uniform(-0.5, 0.5));
    for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial}) {
      const Point a = tau_sigma_project(*saw, x, 1.0, 0.0, m, rng);
      const ProjectionResult pr = saw->project(x);
      double best = kInf;
      for (const Point& p : pr.points) best = std::min(best, (p - a).norm());
      EXPECT_LT(best, 1e-6) << to_string(m);
      EXPECT_NEAR((x - a).norm(), pr.distance, 1e-9);
    }
  }
}

TEST(TauSigmaProjection, LineAdmissibleIntervalMatchesScan) {
  const double d = 0.5;
  const Point x = p2(0.2, d);
  for (double tau : {0.8, 0.95})
    for (double sigma : {0.05, 0.3, 0.9}) {
      const auto [lo, hi] = scan_line_interval(d, tau, sigma);
      const double grid = 4.0 * d / 200000.0;
      for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial})
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          const Point a = tau_sigma_project(*kXAxis, x, tau, sigma, m, seed);
          EXPECT_NEAR(a[1], 0.0, 1e-15);
          const double t = a[0] - 0.2;
          EXPECT_GE(t, lo - grid);
          EXPECT_LE(t, hi + grid);
          const Certificate c = certify(*kXAxis, x, a);
          EXPECT_TRUE(c.satisfies(tau, sigma)) << c.dist_ratio() << " " << c.normal_ratio();
          if (m == Mode::adversarial) {
            EXPECT_GT(std::abs(t), 0.99 * hi);
          }
        }
    }
}

TEST(TauSigmaProjection, MembersAreFixed) {
  for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial}) {
    EXPECT_EQ(tau_sigma_project(*kBall, p2(0.3, 0.2), 0.7, 0.2, m), p2(0.3, 0.2));
    EXPECT_EQ(sigma_project(*kXAxis, p2(0.3, 0.0), 0.2, m), p2(0.3, 0.0));
  }
}

TEST(TauSigmaProjection, ParameterRange) {
  EXPECT_THROW(tau_sigma_project(*kBall, p2(2, 0), 0.0, 0.1, Mode::nearest), DomainError);
  EXPECT_THROW(tau_sigma_project(*kBall, p2(2, 0), 1.1, 0.1, Mode::nearest), DomainError);
  EXPECT_THROW(tau_sigma_project(*kBall, p2(2, 0), 0.9, 1.0, Mode::nearest), DomainError);
  EXPECT_THROW(sigma_project(*kBall, p2(2, 0), -0.1, Mode::nearest), DomainError);
}

TEST(RunTauSigma, ExactParametersReproduceAlternating) {
  const SetPtr a = inst::sawtooth(), b = inst::diagonal();
  EXPECT_TRUE(same_trace(run_tau_sigma(*a, *b, p2(0.4, 0.35), 1.0, 0.0, Mode::nearest, {}, 5),
                         alternating(*a, *b, p2(0.4, 0.35), {}, TiePolicy::lexicographic, 5)));
}

TEST(RunTauSigma, SixtyDegreeLinesConvergeWithCertificates) {
  const SetPtr a = inst::line_at(0), b = inst::line_at(60);
  for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const IterationTrace tr = run_tau_sigma(*a, *b, p2(0.05, 0.02), 0.9, 0.05, m, {}, seed);
      ASSERT_TRUE(tr.converged) << to_string(m);
      EXPECT_TRUE(tr.certificates_ok()) << to_string(m);
      EXPECT_LT(tr.limit->norm(), 1e-10);
    }
}

TEST(RunTauSigma, InexactRunsOnNonconvexSetsKeepCertificates) {
  const SetPtr a = inst::sawtooth(), b = inst::diagonal();
  for (Mode m : {Mode::random, Mode::adversarial})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const IterationTrace tr = run_tau_sigma(*a, *b, p2(0.3, 0.25), 0.9, 0.1, m, {1e-12, 20000}, seed);
      EXPECT_TRUE(tr.certificates_ok()) << to_string(m);
      if (tr.converged) {
        EXPECT_LT(a->distance(*tr.limit), 1e-9);
        EXPECT_LT(b->distance(*tr.limit), 1e-9);
      }
    }
}

TEST(SigmaProjection, ZeroSigmaOnConvexSetIsExact) {
  const SetPtr poly = make_convex_polygon({p2(0, 0), p2(1, 0), p2(0.5, 1)});
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Point x = p2(rng.uniform(-1, 2), rng.uniform(-1, 2));
    for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial}) {
      const Point a = sigma_project(*poly, x, 0.0, m, rng);
      // Vertex normal cones apply within the 1e-9 membership tolerance of the
      // vertex, so the adversary can slide that far along an edge.
      EXPECT_LT((a - poly->project(x).points.front()).norm(), 1e-8);
    }
  }
}

TEST(SigmaProjection, SawtoothAdmitsFartherNormalFeet) {
  // Brute force over the two segments of the first tooth and its corners:
  // a is admissible with sigma = 0 iff x - a is normal there.
  const Eigen::Vector2d x(0.6, 0.05);
  const std::vector<Eigen::Vector2d> corners = {{0.5, 0.0}, {0.75, -0.25}, {1.0, 0.0}};
  std::vector<Eigen::Vector2d> admissible;
  for (int s = 0; s < 2; ++s) {
    const Eigen::Vector2d p = corners[s], q = corners[s + 1];
    const double t = (x - p).dot(q - p) / (q - p).squaredNorm();
    if (t > 0.0 && t < 1.0) admissible.push_back(p + t * (q - p));
  }
  ASSERT_EQ(admissible.size(), 2u);
  const double nearest = (x - admissible[0]).norm();
  const double farthest = (x - admissible[1]).norm();
  ASSERT_GT(farthest, nearest + 0.1);

  const SetPtr saw = inst::sawtooth();
  const Point exact = sigma_project(*saw, Point(x), 0.0, Mode::nearest);
  EXPECT_NEAR((exact - Point(admissible[0])).norm(), 0.0, 1e-12);
  const Point adv = sigma_project(*saw, Point(x), 0.0, Mode::adversarial);
  EXPECT_NEAR((adv - Point(admissible[1])).norm(), 0.0, 1e-9);
  EXPECT_GT((Point(x) - adv).norm(), nearest);
}

TEST(SigmaMonotone, ExactConvexRunsNeverFlag) {
  const SetPtr a = inst::line_at(0), b = inst::line_at(60);
  // Exact steps shrink once the run starts on A.
  const Point x0 = p2(0.1, 0.0);
  const IterationTrace tr = run_sigma_monotone(*a, *b, x0, b->project(x0).points.front(), 0.0, Mode::nearest);
  EXPECT_TRUE(tr.converged);
  EXPECT_FALSE(tr.monotonicity_failure);
  const SetPtr poly = make_convex_polygon({p2(-1, -1), p2(1, -1), p2(0, 0.5)});
  const Point y0 = p2(0.6, 0.8);
  const IterationTrace t2 =
      run_sigma_monotone(*kBall, *poly, y0, poly->project(y0).points.front(), 0.0, Mode::nearest);
  EXPECT_TRUE(t2.converged);
  EXPECT_FALSE(t2.monotonicity_failure);
}

TEST(SigmaMonotone, StepsNeverGrow) {
  const SetPtr a = inst::line_at(0), b = inst::line_at(60);
  for (Mode m : {Mode::nearest, Mode::random, Mode::adversarial})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const IterationTrace tr = run_policy(*a, *b, p2(0.08, 0.03), {Scheme::sigma_monotone, 1.0, 0.05, m, seed});
      EXPECT_TRUE(tr.converged) << to_string(m);
      EXPECT_TRUE(tr.certificates_ok());
      for (std::size_t k = 2; k < tr.steps.size(); ++k)
        EXPECT_LE(tr.steps[k].step, tr.steps[k - 1].step * (1 + 1e-12) + 1e-300);
    }
}

TEST(SigmaMonotone, AdversarialZeroSigmaOnConvexSetsConverges) {
  const SetPtr a = inst::line_at(0), b = inst::line_at(45);
  const IterationTrace tr = run_policy(*a, *b, p2(0.3, -0.1), {Scheme::sigma_monotone, 1.0, 0.0, Mode::adversarial, 1});
  EXPECT_TRUE(tr.converged);
  EXPECT_FALSE(tr.monotonicity_failure);
}

TEST(SigmaMonotone, FlagsWhenTheExactProjectionBreaksMonotonicity) {
  // A tiny first step followed by a long one is impossible to repair.
  const SetPtr a = make_affine_subspace(p2(0, 1), {p2(1, 0)});
  const SetPtr b = make_affine_subspace(p2(0, 0), {p2(1, 0)});
  const Point x0 = p2(0, 1e-3);
  const IterationTrace tr = run_sigma_monotone(*a, *b, x0, p2(0, 0), 0.0, Mode::nearest);
  EXPECT_TRUE(tr.monotonicity_failure);
  EXPECT_FALSE(tr.converged);
  EXPECT_EQ(tr.projections(), 1u);
}

TEST(SigmaMonotone, RejectsInadmissibleSecondIterate) {
  const SetPtr a = inst::line_at(0), b = inst::line_at(60);
  EXPECT_THROW(run_sigma_monotone(*a, *b, p2(1, 0), p2(1, 0), 0.1, Mode::nearest), DomainError);
  EXPECT_THROW(run_sigma_monotone(*a, *b, p2(1, 0), p2(-1, -std::sqrt(3.0)), 0.1, Mode::nearest), DomainError);
}

TEST(DistanceDecrease, LineMatchesClosedForm) {
  const Point a = p2(0, 0), b = p2(0.3, 0.4);
  for (double delta : {0.05, 0.1, 0.2}) {
    const double mu = (0.3 - delta) / std::hypot(0.3 - delta, 0.4);
    const double mu_hat = sample_mu(*kXAxis, a, b, delta);
    EXPECT_GE(mu_hat, mu - 1e-12);
    EXPECT_NEAR(mu_hat, mu, 1e-2);
    EXPECT_TRUE(verify_distance_decrease(*kXAxis, a, b, delta));
    EXPECT_LE(0.4, 0.5 - mu * delta);
  }
}

TEST(DistanceDecrease, BallCapGridOracle) {
  const Point a = p2(1, 0), b = p2(2, 0);
  const double delta = 0.1;
  // Grid over the solid ball near a: only u = a keeps ||u - b|| <= 1, where
  // (b - u)/||b - u|| = (1, 0) lies in N(a).
  double mu = kInf;
  for (int i = -200; i <= 200; ++i)
    for (int j = -200; j <= 200; ++j) {
      const Eigen::Vector2d u(1.0 + delta * i / 200.0, delta * j / 200.0);
      if (u.norm() > 1.0 || (u - Eigen::Vector2d(1, 0)).norm() > delta) continue;
      if ((u - Eigen::Vector2d(2, 0)).norm() > 1.0) continue;
      const Eigen::Vector2d w = (Eigen::Vector2d(2, 0) - u).normalized();
      const double dn = u.norm() < 1.0 ? 1.0 : (w - std::max(0.0, w.dot(u)) * u).norm();
      mu = std::min(mu, dn);
    }
  EXPECT_NEAR(mu, 0.0, 1e-15);
  EXPECT_NEAR(sample_mu(*kBall, a, b, delta), mu, 1e-12);
  EXPECT_TRUE(verify_distance_decrease(*kBall, a, b, delta));
}

TEST(DistanceDecrease, ZeroMuIsTheTriangleBound) {
  Rng rng(5);
  const SetPtr saw = inst::sawtooth();
  for (int i = 0; i < 100; ++i) {
    const Point a = saw->project(p2(rng.uniform(0, 1), 0)).points.front();
    Point b = a + 0.1 * rng.unit_vector(2);
    if (saw->distance(b) == 0.0) continue;
    EXPECT_TRUE(verify_distance_decrease(*saw, a, b, 0.05, 0.0));
  }
}

TEST(DistanceDecrease, HoldsOnGoldenSets) {
  Rng rng(17);
  int checked = 0;
  for (const SetPtr& s : {inst::sawtooth(), inst::diagonal(), inst::rays_a(), inst::rays_b()}) {
    for (int i = 0; i < 100; ++i) {
      const Point a = s->project(p2(rng.uniform(-0.3, 0.6), rng.uniform(-0.3, 0.6))).points.front();
      const Point b = a + rng.uniform(0.01, 0.3) * rng.unit_vector(2);
      if (s->distance(b) == 0.0) continue;
      const double delta = rng.uniform(0.01, 1.0) * (a - b).norm();
      EXPECT_TRUE(verify_distance_decrease(*s, a, b, delta, sample_mu(*s, a, b, delta, 200, 200, i)));
      ++checked;
    }
  }
  EXPECT_GT(checked, 350);
}

TEST(DistanceDecrease, Errors) {
  EXPECT_THROW(verify_distance_decrease(*kBall, p2(2, 0), p2(3, 0), 0.1), DomainError);
  EXPECT_THROW(verify_distance_decrease(*kBall, p2(1, 0), p2(0.5, 0), 0.1), DomainError);
  EXPECT_THROW(verify_distance_decrease(*kBall, p2(1, 0), p2(2, 0), 0.0), DomainError);
}

TEST(TraceCsv, HeaderAndRoundTrip) {
  const IterationTrace tr = alternating(*inst::line_at(0), *inst::line_at(30), p2(0.2, 0.1), StopRule{1e-12, 6});
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,tag,x_1,x_2,step_norm,dist_A,dist_B,cert_ratio_tau,cert_ratio_sigma");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 5), "0,x0,");
  for (std::size_t k = 1; k < tr.steps.size(); ++k) {
    std::getline(is, line);
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    ASSERT_EQ(fields.size(), 9u);
    EXPECT_EQ(fields[1], k % 2 == 1 ? "B" : "A");
    EXPECT_EQ(std::stod(fields[2]), tr.steps[k].x[0]);
    EXPECT_EQ(std::stod(fields[3]), tr.steps[k].x[1]);
    EXPECT_EQ(std::stod(fields[4]), tr.steps[k].step);
  }
}
