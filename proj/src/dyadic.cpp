#include "wqlab/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "wqlab/csv.hpp"
#include "wqlab/error.hpp"

namespace wqlab {

namespace {

constexpr int kMaxLevel = 52;

using CellKey = std::vector<std::int64_t>;

std::string describe(const DyadicCell& c) {
  std::string s = "level " + std::to_string(c.level) + " index (";
  for (std::size_t k = 0; k < c.index.size(); ++k) s += (k ? "," : "") + std::to_string(c.index[k]);
  return s + ")";
}

// nu-mass of every charged cell of one level, in key order.
std::map<CellKey, double> charged_cells(const DiscreteMeasure& nu, int level) {
  std::map<CellKey, double> out;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    out[DyadicCell::containing(nu.point(i).data(), nu.dim(), level).index] += nu.weight(i);
  }
  return out;
}

}  // namespace

Box DyadicCell::box() const {
  const auto d = static_cast<Eigen::Index>(index.size());
  const double side = std::ldexp(1.0, -level);
  Eigen::VectorXd lo(d), hi(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    lo[k] = static_cast<double>(index[static_cast<std::size_t>(k)]) * side;
    hi[k] = static_cast<double>(index[static_cast<std::size_t>(k)] + 1) * side;
  }
  return Box(lo, hi);
}

DyadicCell DyadicCell::parent() const {
  if (level == 0) throw DomainError("DyadicCell: the unit cube has no parent");
  DyadicCell p{level - 1, index};
  for (auto& i : p.index) i >>= 1;
  return p;
}

std::vector<DyadicCell> DyadicCell::children() const {
  const std::size_t d = index.size();
  std::vector<DyadicCell> out;
  out.reserve(std::size_t{1} << d);
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    DyadicCell c{level + 1, index};
    for (std::size_t k = 0; k < d; ++k) c.index[k] = 2 * c.index[k] + static_cast<std::int64_t>((mask >> k) & 1U);
    out.push_back(std::move(c));
  }
  return out;
}

DyadicCell DyadicCell::containing(const double* x, int dim, int level) {
  DyadicCell c{level, CellKey(static_cast<std::size_t>(dim))};
  const double scale = std::ldexp(1.0, level);
  const std::int64_t last = (std::int64_t{1} << level) - 1;
  for (int k = 0; k < dim; ++k) {
    const auto i = static_cast<std::int64_t>(std::floor(x[k] * scale));
    c.index[static_cast<std::size_t>(k)] = std::clamp<std::int64_t>(i, 0, last);
  }
  return c;
}

std::vector<CellApproximation> partition_approximation(const BoxMassFn& mu_mass, const DiscreteMeasure& nu,
                                                       const std::vector<Box>& cells) {
  std::vector<CellApproximation> out;
  out.reserve(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    CellApproximation a{cells[k], nu.mass_in(cells[k]), mu_mass(cells[k]), 0.0};
    if (a.nu_mass > 0.0 && a.mu_mass <= 0.0) {
      throw SupportViolationError("partition_approximation: cell " + std::to_string(k) +
                                  " carries nu-mass but no mu-mass");
    }
    a.ratio = a.mu_mass > 0.0 ? a.nu_mass / a.mu_mass : 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<CellApproximation> partition_approximation(const ModelMeasure& mu, const DiscreteMeasure& nu,
                                                       const std::vector<Box>& cells) {
  return partition_approximation([&mu](const Box& b) { return box_mass(mu, b); }, nu, cells);
}

int default_dyadic_level(Eigen::Index n_atoms, int d) {
  const double n = static_cast<double>(std::max<Eigen::Index>(n_atoms, 1));
  return static_cast<int>(std::ceil(std::log2(n) / d - 1e-12)) + 8;
}

DyadicBoundResult dyadic_bound(const ModelMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm, int levels) {
  const int d = mu.dim();
  if (!(p >= 1.0)) throw DomainError("dyadic_bound: p must be >= 1");
  if (levels < 0 || levels > kMaxLevel) throw DomainError("dyadic_bound: levels must lie in [0, 52]");
  if (nu.dim() != d) throw DomainError("dyadic_bound: dimension mismatch");
  if (std::abs(nu.total_mass() - 1.0) > 1e-9) throw DomainError("dyadic_bound: nu must be a probability measure");
  const Box unit = Box::unit_cube(d);
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (!unit.contains(nu.point(i))) throw DomainError("dyadic_bound: nu has an atom outside [0,1)^d");
  }
  if (box_mass(mu, unit) < 1.0 - 1e-9) throw DomainError("dyadic_bound: mu must live on [0,1)^d");

  const double diam_p = std::pow(unit_cube_diameter(norm, d), p);
  DyadicBoundResult r;
  r.levels_used = levels;
  auto fathers = charged_cells(nu, 0);
  for (int l = 0; l < levels; ++l) {
    auto children = charged_cells(nu, l + 1);
    double s = 0.0;
    for (const auto& [key, nu_f] : fathers) {
      const DyadicCell father{l, key};
      const double mu_f = box_mass(mu, father.box());
      if (mu_f <= 0.0) throw SupportViolationError("dyadic_bound: nu charges the mu-null cell " + describe(father));
      for (const DyadicCell& child : father.children()) {
        auto it = children.find(child.index);
        const double nu_c = it == children.end() ? 0.0 : it->second;
        const double mu_c = box_mass(mu, child.box());
        if (nu_c > 0.0 && mu_c <= 0.0) {
          throw SupportViolationError("dyadic_bound: nu charges the mu-null cell " + describe(child));
        }
        s += std::abs(nu_c - nu_f * mu_c / mu_f);
      }
    }
    r.level_sums.push_back(s);
    r.partial_sum += 0.5 * diam_p * std::pow(2.0, -p * l) * s;
    fathers = std::move(children);
  }
  r.tail_bound = diam_p * std::pow(2.0, -p * levels) / (1.0 - std::pow(2.0, -p));
  r.upper_bound = std::pow(r.partial_sum + r.tail_bound, 1.0 / p);
  return r;
}

nlohmann::json to_json(const DyadicBoundResult& r) {
  return nlohmann::json{{"partial_sum", r.partial_sum},
                        {"tail_bound", r.tail_bound},
                        {"upper_bound", r.upper_bound},
                        {"levels_used", r.levels_used}};
}

CouplingResult resample_coupling(const PointSet& points, const std::vector<Box>& cells,
                                 const std::vector<std::int64_t>& targets, const ModelMeasure& mu,
                                 std::uint64_t seed) {
  const Eigen::Index n = points.cols();
  if (targets.size() != cells.size()) throw ArityError("resample_coupling: one target per cell required");
  for (auto t : targets) {
    if (t < 0) throw ArityError("resample_coupling: negative target");
  }
  if (std::accumulate(targets.begin(), targets.end(), std::int64_t{0}) != n) {
    throw ArityError("resample_coupling: targets must sum to the number of points");
  }

  CouplingResult out{points, 0};
  std::vector<std::int64_t> kept(cells.size(), 0);
  std::vector<Eigen::Index> freed;
  for (Eigen::Index j = 0; j < n; ++j) {
    std::size_t k = 0;
    while (k < cells.size() && !cells[k].contains(points.col(j))) ++k;
    if (k < cells.size() && kept[k] < targets[k]) {
      ++kept[k];
    } else {
      freed.push_back(j);
    }
  }
  Rng rng(seed);
  std::size_t next = 0;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (std::int64_t r = kept[k]; r < targets[k]; ++r) out.points.col(freed[next++]) = sample_in_box(mu, cells[k], rng);
  }
  out.mismatches = static_cast<std::int64_t>(freed.size());
  return out;
}

}  // namespace wqlab
