#pragma once

#include <optional>

#include "wqlab/measures.hpp"
#include "wqlab/transport.hpp"

namespace wqlab {

struct SemiDiscreteOptions {
  /// Box to discretize. Defaults to the support box for bounded densities;
  /// required for unbounded ones.
  std::optional<Box> truncation;
  /// Cap on (number of cells) * (number of atoms).
  double edge_cap = 2e7;
  ExactOptions exact;
};

/// A reference measure replaced by its cell masses at the cell centres of a
/// level-m grid over a box, together with the error terms that replacement costs.
struct GridMeasure {
  DiscreteMeasure cells;
  Box box;
  int level = 0;
  double p = 1.0;
  Norm norm = Norm::LInf;
  /// Full number of grid cells, counting empty ones.
  double cell_count = 0.0;
  /// Diameter of one grid cell under the norm.
  double discretization_bound = 0.0;
  /// Error from conditioning on the box; zero when the box holds all the mass.
  double truncation_bound = 0.0;
};

/// Probability-normalized grid measure of m restricted to the box.
/// Throws UnsupportedError for atomic measures and for unbounded ones
/// without a truncation box.
GridMeasure discretize(const ModelMeasure& m, int level, double p, Norm norm, const SemiDiscreteOptions& options = {});

struct SemiDiscreteResult {
  /// rho_p between the grid measure and nu.
  double estimate = 0.0;
  double discretization_bound = 0.0;
  int grid_level = 0;
  double truncation_bound = 0.0;

  double lower() const;
  double upper() const;
};

SemiDiscreteResult semidiscrete(const GridMeasure& grid, const DiscreteMeasure& nu, const SemiDiscreteOptions& options = {});

SemiDiscreteResult semidiscrete(const ModelMeasure& m, const DiscreteMeasure& nu, double p, Norm norm, int level,
                                const SemiDiscreteOptions& options = {});

}  // namespace wqlab
