#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "wqlab/measures.hpp"

namespace wqlab {

struct ExactOptions {
  /// Cap on the combined number of atoms.
  std::size_t max_atoms = 50000;
  /// Up to this many source-target pairs the complete arc set is built up
  /// front. Larger problems start from nearest-neighbour candidates and add
  /// violated pairs in pricing rounds until none remain.
  std::size_t dense_arc_limit = std::size_t{1} << 16;
  int candidates = 8;
  double mass_tolerance = 1e-9;
};

struct PlanEntry {
  Eigen::Index source = 0;
  Eigen::Index target = 0;
  double mass = 0.0;
};

struct TransportPlan {
  std::vector<PlanEntry> entries;
  /// sum of mass * ||x - y||^p
  double cost_p = 0.0;
};

struct TransportResult {
  double rho = 0.0;
  TransportPlan plan;
  /// Optimal dual variables: u_i + v_j <= ||x_i - y_j||^p with equality on the plan.
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

/// Exact p-Wasserstein distance between two discrete measures of equal mass.
/// Throws InfeasibleError on a mass mismatch and CapacityError above the atom cap.
TransportResult rho_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm,
                          const ExactOptions& options = {});

/// Minimum over all permutations for n <= 8 atoms of one common weight.
double rho_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm);

/// Cost matrix entry ||x_i - y_j||^p.
inline double transport_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, Eigen::Index i, Eigen::Index j,
                             double p, Norm norm) {
  return power_p(distance(norm, mu.points().col(i).data(), nu.points().col(j).data(), mu.dim()), p);
}

/// CSV with header source_index,target_index,mass.
void write_plan_csv(std::ostream& out, const TransportPlan& plan);

}  // namespace wqlab
