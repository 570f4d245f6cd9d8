#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "wqlab/measures.hpp"

namespace wqlab {

/// The cube k 2^-l + [0, 2^-l)^d inside [0,1)^d.
struct DyadicCell {
  int level = 0;
  std::vector<std::int64_t> index;

  Box box() const;
  DyadicCell parent() const;
  /// All 2^d children, axis 0 varying fastest.
  std::vector<DyadicCell> children() const;
  /// Cell of the given level containing x (half-open convention).
  static DyadicCell containing(const double* x, int dim, int level);

  friend bool operator==(const DyadicCell&, const DyadicCell&) = default;
  friend auto operator<=>(const DyadicCell&, const DyadicCell&) = default;
};

struct CellApproximation {
  Box cell;
  double nu_mass = 0.0;
  double mu_mass = 0.0;
  /// nu_mass / mu_mass with 0/0 = 0.
  double ratio = 0.0;
};

using BoxMassFn = std::function<double(const Box&)>;

/// Per-cell data of the measure that equals (nu(A)/mu(A)) mu on every cell A.
/// Throws SupportViolationError when a cell has nu-mass but no mu-mass.
std::vector<CellApproximation> partition_approximation(const BoxMassFn& mu_mass, const DiscreteMeasure& nu,
                                                       const std::vector<Box>& cells);
std::vector<CellApproximation> partition_approximation(const ModelMeasure& mu, const DiscreteMeasure& nu,
                                                       const std::vector<Box>& cells);

/// Multiscale upper bound on rho_p(mu, nu). All fields are on the rho_p^p
/// scale except upper_bound, which is (partial_sum + tail_bound)^(1/p).
struct DyadicBoundResult {
  /// (1/2) diam^p sum_{l<L} 2^{-pl} S_l
  double partial_sum = 0.0;
  /// diam^p 2^{-pL} / (1 - 2^{-p}), from S_l <= 2
  double tail_bound = 0.0;
  double upper_bound = 0.0;
  int levels_used = 0;
  /// S_l for l < L.
  std::vector<double> level_sums;
};

/// Level used when none is given: ceil(log2(N^{1/d})) + 8.
int default_dyadic_level(Eigen::Index n_atoms, int d);

/// Both measures must be probability measures on [0,1)^d. Throws
/// SupportViolationError naming the first cell (in level, index order) whose
/// nu-mass is positive while its mu-mass is zero.
DyadicBoundResult dyadic_bound(const ModelMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm, int levels);

nlohmann::json to_json(const DyadicBoundResult& r);

struct CouplingResult {
  PointSet points;
  std::int64_t mismatches = 0;
};

/// Keeps, per cell, the first targets[k] points that land in it and fills
/// the deficit with fresh draws of mu conditioned on the cell, in position
/// order. Points outside every cell are always replaced.
CouplingResult resample_coupling(const PointSet& points, const std::vector<Box>& cells,
                                 const std::vector<std::int64_t>& targets, const ModelMeasure& mu,
                                 std::uint64_t seed);

}  // namespace wqlab
