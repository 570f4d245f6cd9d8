#include "wqlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "wqlab/csv.hpp"
#include "wqlab/error.hpp"

namespace wqlab {

namespace {

constexpr double kHardTolerance = 1e-9;
constexpr double kMaxElementaryCells = 5e7;

void require_regime(double p, int d, const char* who) {
  if (d < 1) throw RegimeError(std::string(who) + ": d must be >= 1");
  if (!(p >= 1.0)) throw RegimeError(std::string(who) + ": requires p >= 1");
  if (!(p < 0.5 * d)) throw RegimeError(std::string(who) + ": requires p < d/2");
}

struct Piece {
  Box box;
  double density;
};

void flatten(const ModelMeasure& m, double weight, std::vector<Piece>& out) {
  if (const auto* u = m.get_if<UniformBox>()) {
    out.push_back({u->box, weight / u->box.volume()});
  } else if (const auto* pc = m.get_if<PiecewiseConstantDensity>()) {
    const std::int64_t per_axis = pc->cells_per_axis();
    const double side = pc->cell_side();
    for (std::size_t flat = 0; flat < pc->values.size(); ++flat) {
      if (pc->values[flat] <= 0.0) continue;
      Eigen::VectorXd lo(pc->dim), hi(pc->dim);
      auto rest = static_cast<std::int64_t>(flat);
      for (int k = 0; k < pc->dim; ++k) {
        const auto i = static_cast<double>(rest % per_axis);
        rest /= per_axis;
        lo[k] = i * side;
        hi[k] = (i + 1.0) * side;
      }
      out.push_back({Box(lo, hi), weight * pc->values[flat]});
    }
  } else if (const auto* mix = m.get_if<Mixture>()) {
    for (std::size_t k = 0; k < mix->components.size(); ++k) {
      if (mix->weights[k] > 0.0) flatten(mix->components[k], weight * mix->weights[k], out);
    }
  } else {
    throw UnsupportedError("hr_integral: needs a density that is constant on boxes");
  }
}

std::string bound_label(const BoundSelection& s) {
  if (s.kind == BoundKind::Pierce) return "pierce(q=" + format_double(s.q) + ")";
  return to_string(s.kind);
}

}  // namespace

double kappa_cube(double p, int d, Norm norm) {
  require_regime(p, d, "kappa_cube");
  const double diam = unit_cube_diameter(norm, d);
  const double bracket = 1.0 / (1.0 - std::pow(2.0, p - 0.5 * d)) + 1.0 / (1.0 - std::pow(2.0, -p));
  return diam * std::pow(2.0, (d - 2.0) / (2.0 * p)) * std::pow(bracket, 1.0 / p);
}

double kappa_pierce(double p, double q, int d, Norm norm) {
  require_regime(p, d, "kappa_pierce");
  if (!(q > d * p / (d - p))) throw RegimeError("kappa_pierce: requires q > dp/(d-p)");
  // The first geometric series converges only for q > 2p, which the condition
  // above does not imply.
  if (!(q > 2.0 * p)) throw RegimeError("kappa_pierce: requires q > 2p");
  const double diam = unit_cube_diameter(norm, d);
  const double kc = kappa_cube(p, d, norm);
  const double first = std::pow(2.0, p - 1.0) * std::pow(2.0, 0.5 * q) * std::pow(diam, p) /
                       (1.0 - std::pow(2.0, p - 0.5 * q));
  const double e = q * (1.0 - p / d);
  const double second = std::pow(2.0, p + e) * std::pow(kc, p) / (1.0 - std::pow(2.0, -e + p));
  return kc * std::pow(first + second, 1.0 / p);
}

double pierce_rhs(const ModelMeasure& m, std::int64_t n, double p, double q, Norm norm) {
  if (n < 1) throw DomainError("pierce_rhs: N must be >= 1");
  const int d = m.dim();
  const double moment = moment_maxnorm(m, q);
  return unit_cube_diameter(norm, d) * kappa_pierce(p, q, d, Norm::LInf) * std::pow(moment, 1.0 / q) *
         std::pow(static_cast<double>(n), -1.0 / d);
}

double hr_integral(const ModelMeasure& m, double p) {
  const int d = m.dim();
  if (!(p >= 1.0 && p < d)) throw DomainError("hr_integral: requires 1 <= p < d");
  std::vector<Piece> pieces;
  flatten(m, 1.0, pieces);
  const double exponent = 1.0 - p / d;

  // Compress all piece faces into one rectilinear grid and sum densities on it.
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
  for (const auto& pc : pieces) {
    for (int k = 0; k < d; ++k) {
      cuts[static_cast<std::size_t>(k)].push_back(pc.box.lower[k]);
      cuts[static_cast<std::size_t>(k)].push_back(pc.box.upper[k]);
    }
  }
  double total = 1.0;
  for (auto& c : cuts) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    total *= static_cast<double>(c.size() - 1);
  }
  if (total > kMaxElementaryCells) throw UnsupportedError("hr_integral: too many elementary cells");

  std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
  for (std::size_t k = 1; k < stride.size(); ++k) stride[k] = stride[k - 1] * (cuts[k - 1].size() - 1);
  std::vector<double> density(static_cast<std::size_t>(total), 0.0);
  std::vector<std::size_t> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d)), idx(static_cast<std::size_t>(d));
  for (const auto& pc : pieces) {
    for (std::size_t k = 0; k < lo.size(); ++k) {
      const auto& c = cuts[k];
      lo[k] = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), pc.box.lower[static_cast<Eigen::Index>(k)]) - c.begin());
      hi[k] = static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), pc.box.upper[static_cast<Eigen::Index>(k)]) - c.begin());
    }
    idx = lo;
    while (true) {
      std::size_t flat = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) flat += idx[k] * stride[k];
      density[flat] += pc.density;
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == hi[k]) {
        idx[k] = lo[k];
        ++k;
      }
      if (k == idx.size()) break;
    }
  }

  double integral = 0.0;
  std::fill(idx.begin(), idx.end(), 0);
  for (std::size_t flat = 0; flat < density.size(); ++flat) {
    if (density[flat] > 0.0) {
      double vol = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) vol *= cuts[k][idx[k] + 1] - cuts[k][idx[k]];
      // Written as mass^exponent * (vol^(1/d))^p so that uniform cubes scale exactly.
      const double root = d == 3 ? std::cbrt(vol) : std::pow(vol, 1.0 / d);
      integral += std::pow(density[flat] * vol, exponent) * std::pow(root, p);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (++idx[k] < cuts[k].size() - 1) break;
      idx[k] = 0;
    }
  }
  return integral;
}

std::string to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::Cube:
      return "cube";
    case BoundKind::Pierce:
      return "pierce";
    case BoundKind::HighResolution:
      break;
  }
  return "high-resolution";
}

std::size_t BoundReport::unsatisfied_hard() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const BoundRow& r) { return r.hard && !r.satisfied; }));
}

BoundReport check_report(const std::vector<ExperimentResult>& summaries, const std::vector<BoundSelection>& selections) {
  if (summaries.empty()) throw IncompleteDataError("check_report: no experiment summaries");
  if (selections.empty()) throw IncompleteDataError("check_report: no bounds selected");
  BoundReport report;
  bool pierce_used = false;
  for (const auto& sel : selections) {
    for (const auto& ex : summaries) {
      const ExperimentSpec& spec = ex.spec;
      const int d = spec.measure.dim();
      if (ex.per_n.empty()) throw IncompleteDataError("check_report: experiment " + spec.id + " has no rows");
      double hr_factor = 0.0;
      if (sel.kind == BoundKind::Cube && box_mass(spec.measure, Box::unit_cube(d)) < 1.0 - 1e-12) {
        throw DomainError("check_report: the cube bound needs a measure on [0,1)^d (" + spec.id + ")");
      }
      if (sel.kind == BoundKind::HighResolution) {
        if (!(sel.kappa_hat > 0.0)) throw IncompleteDataError("check_report: high-resolution rows need kappa_hat");
        hr_factor = std::pow(hr_integral(spec.measure, spec.p), 1.0 / spec.p);
      }
      for (const auto& est : ex.per_n) {
        if (est.records.empty() || !std::isfinite(est.v_upper)) {
          throw IncompleteDataError("check_report: experiment " + spec.id + " N=" + std::to_string(est.n) +
                                    " has no upper bracket");
        }
        BoundRow row;
        row.label = bound_label(sel);
        row.measure_id = spec.id;
        row.n = est.n;
        const double scale = std::pow(static_cast<double>(est.n), -1.0 / d);
        switch (sel.kind) {
          case BoundKind::Cube:
            row.bound = kappa_cube(spec.p, d, spec.norm) * scale;
            break;
          case BoundKind::Pierce:
            row.bound = pierce_rhs(spec.measure, est.n, spec.p, sel.q, spec.norm);
            pierce_used = true;
            break;
          case BoundKind::HighResolution:
            row.bound = sel.kappa_hat * hr_factor * scale;
            row.hard = false;
            break;
        }
        if (row.hard) {
          row.empirical = est.v_upper;
          row.slack = row.bound - row.empirical;
          row.satisfied = row.empirical <= row.bound + kHardTolerance;
        } else {
          row.empirical = est.v_hat;
          row.slack = sel.tolerance - std::abs(row.empirical / row.bound - 1.0);
          row.satisfied = row.slack >= 0.0;
        }
        report.rows.push_back(std::move(row));
      }
    }
  }
  if (pierce_used) {
    report.notes.push_back(
        "pierce bound: max-norm constant times unit_cube_diameter(norm, d); the constant keeps the leading "
        "kappa_cube factor, the variant without it is smaller and unused");
  }
  if (std::any_of(selections.begin(), selections.end(),
                  [](const BoundSelection& s) { return s.kind == BoundKind::HighResolution; })) {
    report.notes.push_back("high-resolution rows are soft: they use an empirical kappa, not a certified constant");
  }
  return report;
}

void write_report_csv(std::ostream& out, const BoundReport& report) {
  CsvWriter csv(out);
  csv.header({"label", "measure_id", "kind", "N", "empirical", "bound", "satisfied", "slack"});
  for (const auto& r : report.rows) {
    csv.field(r.label)
        .field(r.measure_id)
        .field(r.hard ? "hard" : "empirical-constant")
        .field(r.n)
        .field(r.empirical)
        .field(r.bound)
        .field(r.satisfied ? "SATISFIED" : "UNSATISFIED")
        .field(r.slack);
    csv.end_row();
  }
}

void write_report_table(std::ostream& out, const BoundReport& report) {
  out << std::left << std::setw(22) << "bound" << ' ' << std::setw(16) << "measure" << ' ' << std::setw(8) << "N" << ' '
      << std::setw(24) << "empirical" << ' ' << std::setw(24) << "bound" << ' ' << "status\n";
  for (const auto& r : report.rows) {
    out << std::setw(22) << r.label << ' ' << std::setw(16) << r.measure_id << ' ' << std::setw(8) << r.n << ' '
        << std::setw(24) << format_double(r.empirical) << ' ' << std::setw(24) << format_double(r.bound) << ' '
        << (r.satisfied ? "SATISFIED" : "UNSATISFIED") << (r.hard ? "" : " (soft)") << '\n';
  }
  for (const auto& n : report.notes) out << "note: " << n << '\n';
}

}  // namespace wqlab
