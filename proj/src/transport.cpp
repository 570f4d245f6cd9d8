#include "wqlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <utility>

#include "wqlab/csv.hpp"
#include "wqlab/detail/network_simplex.hpp"
#include "wqlab/error.hpp"

namespace wqlab {

namespace {

// Masses are carried as integers of 2^-50 of the larger total mass.
constexpr double kMassScale = 0x1p50;
constexpr int kMaxPricingRounds = 10000;
constexpr int kArcsPerRowPerRound = 4;

std::vector<std::int64_t> to_integer(const Eigen::VectorXd& w, double scale) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) out[static_cast<std::size_t>(i)] = std::llround(w[i] * scale);
  return out;
}

// Moves the rounding residual onto the largest entry of the side that is short.
void balance(std::vector<std::int64_t>& supply, std::vector<std::int64_t>& demand) {
  const std::int64_t s = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
  const std::int64_t t = std::accumulate(demand.begin(), demand.end(), std::int64_t{0});
  if (s == t) return;
  auto& shorter = s < t ? supply : demand;
  auto it = std::max_element(shorter.begin(), shorter.end());
  *it += s < t ? t - s : s - t;
}

// Upper bound on every pairwise cost: the norm of the joint bounding box.
double cost_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm) {
  const Eigen::VectorXd lo = mu.points().rowwise().minCoeff().cwiseMin(nu.points().rowwise().minCoeff());
  const Eigen::VectorXd hi = mu.points().rowwise().maxCoeff().cwiseMax(nu.points().rowwise().maxCoeff());
  return power_p(norm_of(norm, hi - lo), p) * (1.0 + 1e-12);
}

// Distances from one point to every point of a set, stored coordinate-major
// (one contiguous array per axis) so each axis is a single vectorized pass.
class DistanceRow {
 public:
  DistanceRow(const PointSet& to, Norm norm, double p) : coords_(to.transpose()), norm_(norm), p_(p) {}

  Eigen::Index size() const { return coords_.rows(); }

  /// ||x - y_j||^p for every j.
  const Eigen::ArrayXd& costs(const double* x) {
    row_.resize(coords_.rows());
    for (Eigen::Index k = 0; k < coords_.cols(); ++k) {
      auto diff = (coords_.col(k).array() - x[k]).abs();
      switch (norm_) {
        case Norm::L1:
          if (k == 0) row_ = diff; else row_ += diff;
          break;
        case Norm::L2:
          if (k == 0) row_ = diff.square(); else row_ += diff.square();
          break;
        case Norm::LInf:
          if (k == 0) row_ = diff; else row_ = row_.max(diff);
          break;
      }
    }
    if (norm_ == Norm::L2) row_ = row_.sqrt();
    if (p_ == 2.0) {
      row_ = row_.square();
    } else if (p_ != 1.0) {
      row_ = row_.pow(p_);
    }
    return row_;
  }

 private:
  Eigen::MatrixXd coords_;
  Norm norm_;
  double p_;
  Eigen::ArrayXd row_;
};

// k cheapest columns of `to` for every column of `from`, as (from, to) pairs.
void nearest_pairs(const PointSet& from, const PointSet& to, int k, Norm norm, bool swap,
                   std::vector<std::pair<int, int>>& out) {
  DistanceRow row(to, norm, 1.0);
  const auto keep = static_cast<std::size_t>(std::min<Eigen::Index>(k, to.cols()));
  // Sorted (distance, index) buffer of the best `keep` seen so far.
  std::vector<std::pair<double, int>> top;
  top.reserve(keep + 1);
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    const Eigen::ArrayXd& dist = row.costs(from.col(i).data());
    top.clear();
    for (Eigen::Index j = 0; j < dist.size(); ++j) {
      if (top.size() == keep && dist[j] >= top.back().first) continue;
      const std::pair<double, int> entry(dist[j], static_cast<int>(j));
      top.insert(std::upper_bound(top.begin(), top.end(), entry), entry);
      if (top.size() > keep) top.pop_back();
    }
    for (const auto& [dj, j] : top) out.emplace_back(swap ? j : static_cast<int>(i), swap ? static_cast<int>(i) : j);
  }
}

void solve_dense(detail::TransportSimplex& sx, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                 Norm norm) {
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  sx.reserve_arcs(static_cast<std::size_t>(n * m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      sx.add_arc(static_cast<int>(i), static_cast<int>(j), transport_cost(mu, nu, i, j, p, norm));
    }
  }
  sx.solve();
  sx.refresh_potentials();
}

void solve_priced(detail::TransportSimplex& sx, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                  Norm norm, int candidates) {
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  std::vector<std::pair<int, int>> pairs;
  nearest_pairs(mu.points(), nu.points(), candidates, norm, false, pairs);
  nearest_pairs(nu.points(), mu.points(), candidates, norm, true, pairs);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  sx.reserve_arcs(pairs.size() * 2);
  for (const auto& [i, j] : pairs) sx.add_arc(i, j, transport_cost(mu, nu, i, j, p, norm));

  DistanceRow row(nu.points(), norm, p);
  Eigen::ArrayXd target_pi(m);
  std::vector<std::pair<double, int>> best;
  for (int round = 0; round < kMaxPricingRounds; ++round) {
    sx.solve();
    sx.refresh_potentials();
    const double tol = sx.tolerance();
    for (Eigen::Index j = 0; j < m; ++j) target_pi[j] = sx.target_potential(static_cast<int>(j));
    std::size_t added = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXd& cost = row.costs(mu.points().col(i).data());
      const double shift = sx.source_potential(static_cast<int>(i));
      if ((cost - target_pi).minCoeff() + shift >= -tol) continue;
      best.clear();
      for (Eigen::Index j = 0; j < m; ++j) {
        const double rc = cost[j] - target_pi[j] + shift;
        if (rc < -tol) best.emplace_back(rc, static_cast<int>(j));
      }
      const auto keep = std::min<std::size_t>(best.size(), kArcsPerRowPerRound);
      std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(keep), best.end());
      for (std::size_t r = 0; r < keep; ++r) {
        const int j = best[r].second;
        sx.add_arc(static_cast<int>(i), j, cost[j]);
      }
      added += keep;
    }
    if (added == 0) return;
  }
  throw Error("rho_exact: pricing did not converge");
}

}  // namespace

TransportResult rho_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm,
                          const ExactOptions& options) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("rho_exact: p must be >= 1");
  const double gap = std::abs(mu.total_mass() - nu.total_mass());
  if (gap > options.mass_tolerance) {
    throw InfeasibleError("rho_exact: total masses differ by " + format_double(gap));
  }
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  if (static_cast<std::size_t>(n + m) > options.max_atoms) {
    throw CapacityError("rho_exact: " + std::to_string(n + m) + " atoms exceed the cap of " +
                        std::to_string(options.max_atoms));
  }
  TransportResult result;
  result.u = Eigen::VectorXd::Zero(n);
  result.v = Eigen::VectorXd::Zero(m);
  if (n == 0 || m == 0) return result;
  if (mu.dim() != nu.dim()) throw DomainError("rho_exact: dimension mismatch");

  const double scale = kMassScale / std::max(mu.total_mass(), nu.total_mass());
  auto supply = to_integer(mu.weights(), scale);
  auto demand = to_integer(nu.weights(), scale);
  balance(supply, demand);

  detail::TransportSimplex sx(supply, demand, cost_bound(mu, nu, p, norm));
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(m) <= options.dense_arc_limit) {
    solve_dense(sx, mu, nu, p, norm);
  } else {
    solve_priced(sx, mu, nu, p, norm, options.candidates);
  }
  if (sx.artificial_flow()) throw Error("rho_exact: solver left flow on artificial arcs");

  std::vector<PlanEntry> entries;
  sx.for_each_flow([&](int i, int j, std::int64_t flow, double) {
    entries.push_back({i, j, static_cast<double>(flow) / scale});
  });
  std::sort(entries.begin(), entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return std::pair(a.source, a.target) < std::pair(b.source, b.target);
  });
  // Parallel arcs from pricing rounds collapse into one entry.
  std::size_t out = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (out > 0 && entries[out - 1].source == entries[k].source && entries[out - 1].target == entries[k].target) {
      entries[out - 1].mass += entries[k].mass;
    } else {
      entries[out++] = entries[k];
    }
  }
  entries.resize(out);

  double cost = 0.0;
  for (const auto& e : entries) cost += e.mass * transport_cost(mu, nu, e.source, e.target, p, norm);
  result.plan.entries = std::move(entries);
  result.plan.cost_p = std::max(cost, 0.0);
  result.rho = std::pow(result.plan.cost_p, 1.0 / p);
  for (Eigen::Index i = 0; i < n; ++i) result.u[i] = -sx.source_potential(static_cast<int>(i));
  for (Eigen::Index j = 0; j < m; ++j) result.v[j] = sx.target_potential(static_cast<int>(j));
  return result;
}

double rho_bruteforce(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p, Norm norm) {
  const Eigen::Index n = mu.size();
  if (n != nu.size() || n == 0 || n > 8) throw UnsupportedError("rho_bruteforce: needs 1..8 atoms on both sides");
  const double w = mu.weight(0);
  auto equal = [w](double x) { return std::abs(x - w) <= 1e-12 * w; };
  if (!mu.weights().unaryExpr(equal).all() || !nu.weights().unaryExpr(equal).all()) {
    throw UnsupportedError("rho_bruteforce: all atoms must carry one common weight");
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += transport_cost(mu, nu, i, perm[static_cast<std::size_t>(i)], p, norm);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(w * best, 1.0 / p);
}

void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  CsvWriter csv(out);
  csv.header({"source_index", "target_index", "mass"});
  for (const auto& e : plan.entries) {
    csv.field(static_cast<std::int64_t>(e.source)).field(static_cast<std::int64_t>(e.target)).field(e.mass);
    csv.end_row();
  }
}

}  // namespace wqlab
