#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "wqlab/error.hpp"
#include "wqlab/semidiscrete.hpp"
#include "wqlab/transport.hpp"

using namespace wqlab;
using namespace wqlab::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double t : v) x[k++] = t;
  return x;
}

void expect_feasible_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const TransportResult& r, double p,
                          Norm norm) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(mu.size()), cols = Eigen::VectorXd::Zero(nu.size());
  double cost = 0.0;
  for (const auto& e : r.plan.entries) {
    EXPECT_GE(e.mass, 0.0);
    rows[e.source] += e.mass;
    cols[e.target] += e.mass;
    cost += e.mass * transport_cost(mu, nu, e.source, e.target, p, norm);
    // Complementary slackness on the support of the plan.
    EXPECT_NEAR(r.u[e.source] + r.v[e.target], transport_cost(mu, nu, e.source, e.target, p, norm), 1e-9);
  }
  EXPECT_LE((rows - mu.weights()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((cols - nu.weights()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(cost, r.plan.cost_p, 1e-9);
  // Dual feasibility everywhere.
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    for (Eigen::Index j = 0; j < nu.size(); ++j) {
      EXPECT_LE(r.u[i] + r.v[j], transport_cost(mu, nu, i, j, p, norm) + 1e-9);
    }
  }
}

}  // namespace

TEST(RhoExact, SingleAtoms) {
  const auto x = vec({0.1, 0.2, 0.3}), y = vec({1.0, -1.0, 0.5});
  for (int k = 0; k < 3; ++k) {
    const Norm norm = norm_at(k);
    for (double p : {1.0, 2.0, 3.5}) {
      EXPECT_NEAR(rho_exact(DiscreteMeasure::dirac(x), DiscreteMeasure::dirac(y), p, norm).rho, distance(norm, x, y),
                  1e-12);
    }
  }
}

TEST(RhoExact, ForcedPlan) {
  PointSet pts(3, 2);
  pts << 0, 1, 0, 0, 0, 0;
  const DiscreteMeasure mu(pts, vec({0.5, 0.5}));
  const auto r = rho_exact(mu, DiscreteMeasure::dirac(vec({0, 0, 0})), 1.0, Norm::LInf);
  EXPECT_NEAR(r.rho, 0.5, 1e-12);
}

TEST(RhoExact, MatchesPermutationOracle) {
  Rng rng(11);
  for (int t = 0; t < 60; ++t) {
    const Norm norm = norm_at(t);
    const double p = t % 2 ? 2.0 : 1.0;
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(6));
    const PointSet x = random_points(3, n, rng), y = random_points(3, n, rng);
    const double oracle = permutation_oracle(x, y, p, norm);
    const auto mu = DiscreteMeasure::empirical(x), nu = DiscreteMeasure::empirical(y);
    const auto r = rho_exact(mu, nu, p, norm);
    EXPECT_NEAR(r.rho, oracle, 1e-9);
    EXPECT_NEAR(rho_bruteforce(mu, nu, p, norm), oracle, 1e-12);
    expect_feasible_plan(mu, nu, r, p, norm);
  }
}

TEST(RhoExact, UnequalSizesAndWeights) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const Norm norm = norm_at(t);
    const auto mu = random_weighted(3, 7, 2.0, rng), nu = random_weighted(3, 11, 2.0, rng);
    const auto r = rho_exact(mu, nu, 1.5, norm);
    expect_feasible_plan(mu, nu, r, 1.5, norm);
    EXPECT_NEAR(std::pow(r.plan.cost_p, 1 / 1.5), r.rho, 1e-12);
  }
}

TEST(RhoExact, PricedModeMatchesDenseMode) {
  Rng rng(13);
  const auto mu = random_weighted(3, 300, 1.0, rng), nu = DiscreteMeasure::empirical(random_points(3, 40, rng));
  ExactOptions dense, priced;
  priced.dense_arc_limit = 100;
  priced.candidates = 2;
  const auto a = rho_exact(mu, nu, 1.0, Norm::L2, dense), b = rho_exact(mu, nu, 1.0, Norm::L2, priced);
  EXPECT_NEAR(a.rho, b.rho, 1e-12);
  expect_feasible_plan(mu, nu, b, 1.0, Norm::L2);
}

TEST(RhoExact, Errors) {
  const auto a = DiscreteMeasure::dirac(vec({0, 0}), 1.0), b = DiscreteMeasure::dirac(vec({1, 0}), 1.5);
  EXPECT_THROW(rho_exact(a, b, 1.0, Norm::L2), InfeasibleError);
  Rng rng(1);
  const auto big = random_equal_weight(2, 20, rng);
  ExactOptions tiny;
  tiny.max_atoms = 10;
  EXPECT_THROW(rho_exact(big, big, 1.0, Norm::L2, tiny), CapacityError);
}

TEST(RhoBruteforce, Examples) {
  Rng rng(2);
  const auto m = random_equal_weight(3, 5, rng);
  EXPECT_DOUBLE_EQ(rho_bruteforce(m, m, 2.0, Norm::L2), 0.0);
  PointSet x(3, 2), y(3, 2);
  x << 0, 1, 0, 0, 0, 0;
  y << 1, 2, 0, 0, 0, 0;
  EXPECT_DOUBLE_EQ(rho_bruteforce(DiscreteMeasure::empirical(x), DiscreteMeasure::empirical(y), 1.0, Norm::LInf), 1.0);
  EXPECT_THROW(rho_bruteforce(random_equal_weight(2, 9, rng), random_equal_weight(2, 9, rng), 1.0, Norm::L2),
               UnsupportedError);
  EXPECT_THROW(rho_bruteforce(random_weighted(2, 3, 1.0, rng), random_weighted(2, 3, 1.0, rng), 1.0, Norm::L2),
               UnsupportedError);
}

TEST(RhoBruteforce, CrossOracle) {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const auto mu = random_equal_weight(3, 5, rng), nu = random_equal_weight(3, 5, rng);
    const Norm norm = norm_at(t);
    EXPECT_NEAR(rho_bruteforce(mu, nu, 1.0, norm), rho_exact(mu, nu, 1.0, norm).rho, 1e-9);
  }
}

TEST(PlanCsv, Header) {
  TransportPlan plan;
  plan.entries.push_back({0, 1, 0.25});
  std::ostringstream os;
  write_plan_csv(os, plan);
  EXPECT_EQ(os.str(), "source_index,target_index,mass\n0,1,0.25\n");
}

TEST(SemiDiscrete, CentreAndCorner) {
  const auto u = make_unit_cube(3);
  const auto centre = semidiscrete(u, DiscreteMeasure::dirac(vec({0.5, 0.5, 0.5})), 1.0, Norm::LInf, 5);
  EXPECT_NEAR(centre.estimate, 0.375, 1.0 / 32);
  EXPECT_DOUBLE_EQ(centre.discretization_bound, 1.0 / 32);
  EXPECT_LE(centre.lower(), 0.375);
  EXPECT_GE(centre.upper(), 0.375);
  const auto corner = semidiscrete(u, DiscreteMeasure::dirac(vec({0, 0, 0})), 1.0, Norm::LInf, 5);
  EXPECT_NEAR(corner.estimate, 0.75, 1.0 / 32);
  EXPECT_LE(corner.lower(), 0.75);
  EXPECT_GE(corner.upper(), 0.75);
}

TEST(SemiDiscrete, GridMeasureItselfGivesZero) {
  const auto u = make_unit_cube(3);
  const GridMeasure g = discretize(u, 3, 1.0, Norm::L2);
  EXPECT_EQ(g.cells.size(), 512);
  EXPECT_NEAR(semidiscrete(g, g.cells).estimate, 0.0, 1e-12);
}

TEST(SemiDiscrete, BracketHoldsAgainstFineGrid) {
  // The level-5 estimate is within its own bound of the truth, so the
  // level-2 bracket widened by that bound must contain it.
  Rng rng(4);
  const auto u = make_uniform_box(vec({0, 0, 0}), vec({0.5, 1, 1}));
  const auto nu = DiscreteMeasure::empirical(random_points(3, 6, rng).cwiseProduct(PointSet::Constant(3, 6, 0.8)));
  const auto coarse = semidiscrete(u, nu, 1.0, Norm::L2, 2), fine = semidiscrete(u, nu, 1.0, Norm::L2, 5);
  EXPECT_LE(coarse.lower(), fine.upper());
  EXPECT_GE(coarse.upper(), fine.lower());
  EXPECT_LT(fine.discretization_bound, coarse.discretization_bound);
}

TEST(SemiDiscrete, Errors) {
  const auto nu = DiscreteMeasure::dirac(vec({0, 0, 0}));
  EXPECT_THROW(semidiscrete(make_two_point(vec({0, 0, 0}), vec({1, 1, 1}), 0.5), nu, 1.0, Norm::L2, 2),
               UnsupportedError);
  EXPECT_THROW(semidiscrete(make_product_laplace(1, 3), nu, 1.0, Norm::L2, 2), UnsupportedError);
  SemiDiscreteOptions cap;
  cap.edge_cap = 100;
  EXPECT_THROW(semidiscrete(make_unit_cube(3), nu, 1.0, Norm::L2, 3, cap), CapacityError);
  EXPECT_THROW(semidiscrete(make_unit_cube(3), nu.scaled(2.0), 1.0, Norm::L2, 2), InfeasibleError);
}

TEST(SemiDiscrete, TruncatedUnboundedMeasure) {
  const auto lap = make_product_laplace(1.0, 3);
  SemiDiscreteOptions opts;
  opts.truncation = truncation_box(lap, 1e-6);
  const auto r = semidiscrete(lap, DiscreteMeasure::dirac(vec({0, 0, 0})), 1.0, Norm::LInf, 4, opts);
  // E max|X_k| for three unit Laplace coordinates is 11/6.
  EXPECT_GT(r.truncation_bound, 0.0);
  EXPECT_LE(r.lower(), 11.0 / 6.0);
  EXPECT_GE(r.upper(), 11.0 / 6.0);
}
