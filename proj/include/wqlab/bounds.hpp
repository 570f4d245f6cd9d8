#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wqlab/measures.hpp"
#include "wqlab/quantize.hpp"

namespace wqlab {

/// Constant of the N^{-1/d} bound for measures on [0,1)^d. Requires 1 <= p < d/2.
double kappa_cube(double p, int d, Norm norm);

/// Constant of the moment bound for measures on R^d. Requires 1 <= p < d/2,
/// q > dp/(d-p) and q > 2p; RegimeError names the inequality that fails.
double kappa_pierce(double p, double q, int d, Norm norm);

/// ||x|| <= c ||x||_max with c = unit_cube_diameter(norm, d); the moment
/// bound is stated for the max norm and transferred with this factor.
double pierce_rhs(const ModelMeasure& m, std::int64_t n, double p, double q, Norm norm);

/// Integral of f^{1-p/d} for a density f that is constant on boxes
/// (UniformBox, PiecewiseConstantDensity and mixtures of those).
double hr_integral(const ModelMeasure& m, double p);

enum class BoundKind { Cube, Pierce, HighResolution };

std::string to_string(BoundKind kind);

struct BoundSelection {
  BoundKind kind = BoundKind::Cube;
  /// Moment order for Pierce rows.
  double q = 3.0;
  /// Empirical N^{1/d} V_N limit for the unit cube, used by high-resolution rows.
  double kappa_hat = 0.0;
  /// Relative tolerance of high-resolution rows.
  double tolerance = 0.15;
};

struct BoundRow {
  std::string label;
  std::string measure_id;
  std::int64_t n = 0;
  /// Certified upper bracket for hard rows, the estimate for soft rows.
  double empirical = 0.0;
  double bound = 0.0;
  bool satisfied = false;
  double slack = 0.0;
  /// Hard rows are certified checks; soft rows compare with an empirical constant.
  bool hard = true;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  std::vector<std::string> notes;

  std::size_t unsatisfied_hard() const;
};

/// One row per (selection, experiment, N). Hard rows pass when the upper
/// bracket is at most bound + 1e-9; soft rows when the estimate lies within
/// the relative tolerance of kappa_hat * hr_integral^{1/p} N^{-1/d}.
/// Throws IncompleteDataError on empty input or missing brackets.
BoundReport check_report(const std::vector<ExperimentResult>& summaries, const std::vector<BoundSelection>& selections);

/// label,measure_id,kind,N,empirical,bound,satisfied,slack
void write_report_csv(std::ostream& out, const BoundReport& report);
void write_report_table(std::ostream& out, const BoundReport& report);

}  // namespace wqlab
