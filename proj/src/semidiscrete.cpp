#include "wqlab/semidiscrete.hpp"

#include <algorithm>
#include <cmath>

#include "wqlab/csv.hpp"
#include "wqlab/error.hpp"

namespace wqlab {

GridMeasure discretize(const ModelMeasure& m, int level, double p, Norm norm, const SemiDiscreteOptions& options) {
  if (level < 0 || level > 20) throw DomainError("discretize: grid level must lie in [0, 20]");
  if (!(p >= 1.0)) throw DomainError("discretize: p must be >= 1");
  if (atoms_of(m)) throw UnsupportedError("semidiscrete: the reference measure is atomic; use the exact solver");

  const int d = m.dim();
  std::optional<Box> box = options.truncation;
  if (!box) box = density_support_box(m);
  if (!box) throw UnsupportedError("semidiscrete: unbounded support needs a truncation box");
  if (box->dim() != d) throw DomainError("semidiscrete: truncation box dimension mismatch");

  GridMeasure grid;
  grid.box = *box;
  grid.level = level;
  grid.p = p;
  grid.norm = norm;
  const std::int64_t per_axis = std::int64_t{1} << level;
  grid.cell_count = std::ldexp(1.0, level * d);
  if (grid.cell_count > 1e8) throw CapacityError("semidiscrete: more than 1e8 grid cells");
  const Eigen::VectorXd side = (box->upper - box->lower) / static_cast<double>(per_axis);
  grid.discretization_bound = norm_of(norm, side);

  const auto count = static_cast<Eigen::Index>(grid.cell_count);
  PointSet centres(d, count);
  Eigen::VectorXd mass(count);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 0);
  for (Eigen::Index c = 0; c < count; ++c) {
    Eigen::VectorXd lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      const auto i = static_cast<double>(idx[static_cast<std::size_t>(k)]);
      lo[k] = box->lower[k] + i * side[k];
      // The last cell ends exactly on the box face.
      hi[k] = idx[static_cast<std::size_t>(k)] + 1 == per_axis ? box->upper[k] : box->lower[k] + (i + 1.0) * side[k];
    }
    centres.col(c) = 0.5 * (lo + hi);
    mass[c] = box_mass(m, Box(lo, hi));
    for (int k = 0; k < d; ++k) {
      auto& ik = idx[static_cast<std::size_t>(k)];
      if (++ik < per_axis) break;
      ik = 0;
    }
  }
  const double inside = mass.sum();
  if (!(inside > 0.0)) throw DomainError("semidiscrete: the box carries no mass");
  grid.cells = DiscreteMeasure(std::move(centres), mass / inside);

  // Conditioning on the box moves at most the outside mass; its cost is
  // bounded through the max-norm tail moment and the box radius.
  const TailMoment tail = tail_moment_maxnorm(m, *box, p);
  if (tail.mass > 0.0) {
    const double radius = std::max(box->lower.cwiseAbs().maxCoeff(), box->upper.cwiseAbs().maxCoeff());
    const double c = unit_cube_diameter(norm, d);
    const double bound_p = std::pow(2.0, p - 1.0) * std::pow(c, p) * (tail.moment + tail.mass * std::pow(radius, p));
    grid.truncation_bound = std::pow(bound_p, 1.0 / p);
  }
  return grid;
}

double SemiDiscreteResult::lower() const {
  return std::max(estimate - discretization_bound - truncation_bound, 0.0);
}

double SemiDiscreteResult::upper() const { return estimate + discretization_bound + truncation_bound; }

SemiDiscreteResult semidiscrete(const GridMeasure& grid, const DiscreteMeasure& nu, const SemiDiscreteOptions& options) {
  if (std::abs(nu.total_mass() - 1.0) > options.exact.mass_tolerance) {
    throw InfeasibleError("semidiscrete: nu must be a probability measure, total mass " +
                          format_double(nu.total_mass()));
  }
  const double edges = grid.cell_count * static_cast<double>(nu.size());
  if (edges > options.edge_cap) {
    throw CapacityError("semidiscrete: " + format_double(edges) + " cell-atom pairs exceed the edge cap of " +
                        format_double(options.edge_cap));
  }
  SemiDiscreteResult r;
  r.estimate = rho_exact(grid.cells, nu, grid.p, grid.norm, options.exact).rho;
  r.discretization_bound = grid.discretization_bound;
  r.grid_level = grid.level;
  r.truncation_bound = grid.truncation_bound;
  return r;
}

SemiDiscreteResult semidiscrete(const ModelMeasure& m, const DiscreteMeasure& nu, double p, Norm norm, int level,
                                const SemiDiscreteOptions& options) {
  const double edges = std::ldexp(1.0, level * m.dim()) * static_cast<double>(nu.size());
  if (edges > options.edge_cap) {
    throw CapacityError("semidiscrete: " + format_double(edges) + " cell-atom pairs exceed the edge cap of " +
                        format_double(options.edge_cap));
  }
  return semidiscrete(discretize(m, level, p, norm, options), nu, options);
}

}  // namespace wqlab
