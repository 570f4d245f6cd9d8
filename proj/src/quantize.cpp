#include "wqlab/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wqlab/dyadic.hpp"
#include "wqlab/error.hpp"
#include "wqlab/parallel.hpp"
#include "wqlab/transport.hpp"

namespace wqlab {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075794aULL;

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean_root(const std::vector<ReplicationRecord>& recs, double p, double ReplicationRecord::*field) {
  double s = 0.0;
  for (const auto& r : recs) s += std::pow(r.*field, p);
  return std::pow(s / static_cast<double>(recs.size()), 1.0 / p);
}

void summarize(NEstimate& est, double p, int resamples, std::uint64_t master_seed) {
  const auto& recs = est.records;
  const std::size_t r = recs.size();
  double total = 0.0;
  for (const auto& rec : recs) total += rec.rho_p_pow_p;
  est.v_hat = std::pow(total / static_cast<double>(r), 1.0 / p);
  est.v_lower = mean_root(recs, p, &ReplicationRecord::lower);
  est.v_upper = mean_root(recs, p, &ReplicationRecord::upper);

  Rng rng(derive_seed(derive_seed(master_seed, kBootstrapStream), static_cast<std::uint64_t>(est.n)));
  std::vector<double> boot(static_cast<std::size_t>(resamples));
  for (auto& b : boot) {
    double s = 0.0;
    for (std::size_t k = 0; k < r; ++k) s += recs[rng.below(r)].rho_p_pow_p;
    b = std::pow(s / static_cast<double>(r), 1.0 / p);
  }
  const double mean = std::accumulate(boot.begin(), boot.end(), 0.0) / static_cast<double>(boot.size());
  double var = 0.0;
  for (double b : boot) var += (b - mean) * (b - mean);
  est.bootstrap_se = boot.size() > 1 ? std::sqrt(var / static_cast<double>(boot.size() - 1)) : 0.0;
  std::sort(boot.begin(), boot.end());
  est.ci_lo = quantile(boot, 0.025);
  est.ci_hi = quantile(boot, 0.975);
}

std::string context(std::int64_t n, int rep) {
  return "N=" + std::to_string(n) + ", rep=" + std::to_string(rep) + ": ";
}

// ------------------------------------------------------------- quantizer

double distortion_of(const double* x, const double* c, Eigen::Index d, double p, Norm norm) {
  return power_p(distance(norm, x, c, d), p);
}

// Minimizes sum_x ||x - c||^p over one coordinate of c at a time.
void coordinate_centroid(const PointSet& cloud, const std::vector<Eigen::Index>& members, double p, Norm norm,
                         Eigen::Ref<Eigen::VectorXd> c) {
  const Eigen::Index d = cloud.rows();
  Eigen::VectorXd trial = c;
  auto cost = [&](Eigen::Index k, double t) {
    trial[k] = t;
    double s = 0.0;
    for (auto j : members) s += distortion_of(cloud.col(j).data(), trial.data(), d, p, norm);
    return s;
  };
  constexpr double kInvPhi = 0.6180339887498949;
  constexpr int kSweeps = 4;
  for (int sweep = 0; sweep < kSweeps; ++sweep) {
    for (Eigen::Index k = 0; k < d; ++k) {
      double a = std::numeric_limits<double>::infinity();
      double b = -a;
      for (auto j : members) {
        a = std::min(a, cloud(k, j));
        b = std::max(b, cloud(k, j));
      }
      trial = c;
      double x1 = b - kInvPhi * (b - a);
      double x2 = a + kInvPhi * (b - a);
      double f1 = cost(k, x1);
      double f2 = cost(k, x2);
      const double stop = 1e-10 * (1.0 + std::abs(a) + std::abs(b));
      for (int it = 0; it < 200 && b - a > stop; ++it) {
        if (f1 <= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - kInvPhi * (b - a);
          f1 = cost(k, x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + kInvPhi * (b - a);
          f2 = cost(k, x2);
        }
      }
      const double best = 0.5 * (a + b);
      if (cost(k, best) <= cost(k, c[k])) c[k] = best;
    }
  }
}

void update_centroid(const PointSet& cloud, const std::vector<Eigen::Index>& members, double p, Norm norm,
                     Eigen::Ref<Eigen::VectorXd> c) {
  const Eigen::Index d = cloud.rows();
  if (p == 2.0 && norm == Norm::L2) {
    c.setZero();
    for (auto j : members) c += cloud.col(j);
    c /= static_cast<double>(members.size());
  } else if (p == 1.0 && norm == Norm::L1) {
    std::vector<double> coord(members.size());
    for (Eigen::Index k = 0; k < d; ++k) {
      for (std::size_t t = 0; t < members.size(); ++t) coord[t] = cloud(k, members[t]);
      std::sort(coord.begin(), coord.end());
      const std::size_t h = coord.size() / 2;
      c[k] = coord.size() % 2 == 1 ? coord[h] : 0.5 * (coord[h - 1] + coord[h]);
    }
  } else {
    coordinate_centroid(cloud, members, p, norm, c);
  }
}

struct Assignment {
  std::vector<Eigen::Index> label;
  std::vector<double> cost;
  double distortion = 0.0;
};

void assign(const PointSet& cloud, const PointSet& codebook, double p, Norm norm, Assignment& a) {
  const Eigen::Index d = cloud.rows();
  const Eigen::Index s = cloud.cols();
  a.label.resize(static_cast<std::size_t>(s));
  a.cost.resize(static_cast<std::size_t>(s));
  double total = 0.0;
  for (Eigen::Index j = 0; j < s; ++j) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index c = 0; c < codebook.cols(); ++c) {
      const double dist = distance(norm, cloud.col(j).data(), codebook.col(c).data(), d);
      if (dist < best) {
        best = dist;
        arg = c;
      }
    }
    a.label[static_cast<std::size_t>(j)] = arg;
    a.cost[static_cast<std::size_t>(j)] = best;
    total += power_p(best, p);
  }
  a.distortion = total / static_cast<double>(s);
}

}  // namespace

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Exact:
      return "exact";
    case SolverKind::SemiDiscrete:
      return "semidiscrete";
    case SolverKind::Dyadic:
      break;
  }
  return "dyadic";
}

SolverKind parse_solver(const std::string& name) {
  if (name == "exact") return SolverKind::Exact;
  if (name == "semidiscrete") return SolverKind::SemiDiscrete;
  if (name == "dyadic") return SolverKind::Dyadic;
  throw DomainError("unknown solver '" + name + "'");
}

std::optional<std::string> validate(const ExperimentSpec& spec) {
  if (!(spec.p >= 1.0) || !std::isfinite(spec.p)) throw DomainError("experiment " + spec.id + ": p must be >= 1");
  if (spec.replications < 2) throw DomainError("experiment " + spec.id + ": at least 2 replications required");
  if (spec.n_values.empty()) throw DomainError("experiment " + spec.id + ": no N values");
  for (auto n : spec.n_values) {
    if (n < 1) throw DomainError("experiment " + spec.id + ": N must be >= 1");
  }
  if (spec.bootstrap_resamples < 1) throw DomainError("experiment " + spec.id + ": bootstrap resamples must be >= 1");
  const int d = spec.measure.dim();
  if (spec.p >= 0.5 * d) {
    return "experiment " + spec.id + ": p >= d/2 lies outside the N^{-1/d} regime";
  }
  return std::nullopt;
}

ExperimentResult v_rand_estimate(const ExperimentSpec& spec, int workers) {
  validate(spec);
  const ModelMeasure& m = spec.measure;
  const int d = m.dim();
  const double p = spec.p;
  const auto& solver = spec.solver;

  std::optional<DiscreteMeasure> atoms;
  std::optional<GridMeasure> grid;
  SemiDiscreteOptions sd;
  sd.edge_cap = solver.edge_cap;
  sd.exact = solver.exact;
  switch (solver.kind) {
    case SolverKind::Exact:
      atoms = atoms_of(m);
      if (!atoms) throw UnsupportedError("experiment " + spec.id + ": the exact solver needs an atomic measure");
      break;
    case SolverKind::SemiDiscrete:
      if (!density_support_box(m)) sd.truncation = truncation_box(m, solver.tail_mass);
      grid = discretize(m, solver.grid_level, p, spec.norm, sd);
      for (auto n : spec.n_values) {
        if (grid->cell_count * static_cast<double>(n) > solver.edge_cap) {
          throw CapacityError("experiment " + spec.id + ": N=" + std::to_string(n) + " at grid level " +
                              std::to_string(solver.grid_level) + " exceeds the edge cap");
        }
      }
      break;
    case SolverKind::Dyadic:
      break;
  }

  const std::size_t reps = static_cast<std::size_t>(spec.replications);
  const std::size_t tasks = spec.n_values.size() * reps;
  std::vector<ReplicationRecord> records(tasks);
  parallel_for(tasks, workers, [&](std::size_t t) {
    const std::int64_t n = spec.n_values[t / reps];
    const int rep = static_cast<int>(t % reps);
    ReplicationRecord rec;
    rec.n = n;
    rec.rep = rep;
    rec.seed = derive_seed(spec.master_seed, static_cast<std::uint64_t>(rep));
    try {
      const DiscreteMeasure emp = DiscreteMeasure::empirical(sample(m, n, rec.seed));
      switch (solver.kind) {
        case SolverKind::Exact: {
          const double rho = rho_exact(*atoms, emp, p, spec.norm, solver.exact).rho;
          rec.rho_p_pow_p = std::pow(rho, p);
          rec.lower = rho;
          rec.upper = rho;
          break;
        }
        case SolverKind::SemiDiscrete: {
          const SemiDiscreteResult r = semidiscrete(*grid, emp, sd);
          rec.rho_p_pow_p = std::pow(r.estimate, p);
          rec.lower = r.lower();
          rec.upper = r.upper();
          break;
        }
        case SolverKind::Dyadic: {
          const int levels = solver.dyadic_level >= 0 ? solver.dyadic_level : default_dyadic_level(n, d);
          const DyadicBoundResult r = dyadic_bound(m, emp, p, spec.norm, levels);
          rec.rho_p_pow_p = r.partial_sum + r.tail_bound;
          rec.lower = 0.0;
          rec.upper = r.upper_bound;
          break;
        }
      }
    } catch (const CapacityError& e) {
      throw CapacityError(context(n, rep) + e.what());
    } catch (const UnsupportedError& e) {
      throw UnsupportedError(context(n, rep) + e.what());
    } catch (const SupportViolationError& e) {
      throw SupportViolationError(context(n, rep) + e.what());
    }
    records[t] = rec;
  });

  ExperimentResult out{spec, {}};
  for (std::size_t a = 0; a < spec.n_values.size(); ++a) {
    NEstimate est;
    est.n = spec.n_values[a];
    est.records.assign(records.begin() + static_cast<std::ptrdiff_t>(a * reps),
                       records.begin() + static_cast<std::ptrdiff_t>((a + 1) * reps));
    summarize(est, p, spec.bootstrap_resamples, spec.master_seed);
    out.per_n.push_back(std::move(est));
  }
  return out;
}

double two_point_exact(std::int64_t n, double p, double w, double dist) {
  if (n < 1) throw DomainError("two_point_exact: N must be >= 1");
  if (!(w >= 0.0 && w <= 1.0)) throw DomainError("two_point_exact: w must lie in [0, 1]");
  if (!(p >= 1.0)) throw DomainError("two_point_exact: p must be >= 1");
  if (!(dist >= 0.0)) throw DomainError("two_point_exact: distance must be >= 0");
  if (w == 0.0 || w == 1.0 || dist == 0.0) return 0.0;
  const double nn = static_cast<double>(n);
  const double log_w = std::log(w);
  const double log_1w = std::log1p(-w);
  const double log_nfact = std::lgamma(nn + 1.0);
  double s = 0.0;
  for (std::int64_t k = 0; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double log_pk =
        log_nfact - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) + kk * log_w + (nn - kk) * log_1w;
    s += std::exp(log_pk) * std::abs(kk / nn - w);
  }
  return dist * std::pow(s, 1.0 / p);
}

QuantizerResult optimal_quantizer(const ModelMeasure& m, Eigen::Index n, double p, Norm norm, Eigen::Index sample_size,
                                  int restarts, int iters, std::uint64_t seed) {
  if (n < 1) throw DomainError("optimal_quantizer: N must be >= 1");
  if (sample_size < 100 * n) throw DomainError("optimal_quantizer: sample_size must be >= 100 N");
  if (!(p >= 1.0)) throw DomainError("optimal_quantizer: p must be >= 1");
  if (restarts < 1 || iters < 1) throw DomainError("optimal_quantizer: restarts and iters must be >= 1");

  const PointSet cloud = sample(m, sample_size, derive_seed(seed, 0));
  const Eigen::Index d = cloud.rows();
  QuantizerResult best;
  double best_distortion = std::numeric_limits<double>::infinity();
  Assignment a;
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n));

  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r) + 1));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(sample_size));
    std::iota(idx.begin(), idx.end(), 0);
    PointSet codebook(d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto pick = static_cast<std::size_t>(c) + rng.below(static_cast<std::uint64_t>(sample_size - c));
      std::swap(idx[static_cast<std::size_t>(c)], idx[pick]);
      codebook.col(c) = cloud.col(idx[static_cast<std::size_t>(c)]);
    }

    std::vector<Eigen::Index> previous;
    for (int it = 0; it < iters; ++it) {
      assign(cloud, codebook, p, norm, a);
      if (a.label == previous) break;
      previous = a.label;
      for (auto& mem : members) mem.clear();
      for (Eigen::Index j = 0; j < sample_size; ++j) {
        members[static_cast<std::size_t>(a.label[static_cast<std::size_t>(j)])].push_back(j);
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto& mem = members[static_cast<std::size_t>(c)];
        if (mem.empty()) {
          // Reseed at the sample farthest from the codebook, lowest index on ties.
          const auto far = std::max_element(a.cost.begin(), a.cost.end()) - a.cost.begin();
          codebook.col(c) = cloud.col(far);
          a.cost[static_cast<std::size_t>(far)] = 0.0;
        } else {
          update_centroid(cloud, mem, p, norm, codebook.col(c));
        }
      }
    }
    assign(cloud, codebook, p, norm, a);
    if (a.distortion < best_distortion) {
      best_distortion = a.distortion;
      best.codebook = codebook;
    }
  }
  best.v_opt = std::pow(best_distortion, 1.0 / p);
  return best;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> xs;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0)) throw DomainError("rate_fit: N and V must be positive");
    xs.push_back(n);
  }
  std::sort(xs.begin(), xs.end());
  if (std::unique(xs.begin(), xs.end()) - xs.begin() < 3) throw DomainError("rate_fit: needs three distinct N");

  const double k = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [n, v] : points) {
    mx += std::log(n);
    my += std::log(v);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, v] : points) {
    sxx += (std::log(n) - mx) * (std::log(n) - mx);
    sxy += (std::log(n) - mx) * (std::log(v) - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [n, v] : points) {
    const double res = std::log(v) - fit.intercept - fit.slope * std::log(n);
    rss += res * res;
  }
  fit.stderr_slope = points.size() > 2 ? std::sqrt(rss / (k - 2.0) / sxx) : 0.0;
  return fit;
}

double stabilization_diagnostic(const std::vector<double>& values) {
  double worst = 0.0;
  const std::size_t first = values.size() >= 3 ? values.size() - 3 : 0;
  for (std::size_t k = first + 1; k < values.size(); ++k) {
    worst = std::max(worst, std::abs(values[k] - values[k - 1]) / std::abs(values[k - 1]));
  }
  return worst;
}

KappaTrace kappa_unif_trace(double p, int d, Norm norm, const std::vector<std::int64_t>& n_schedule, int replications,
                            std::uint64_t seed, const SolverChoice& solver, int workers) {
  if (!(p >= 1.0 && p < 0.5 * d)) throw RegimeError("kappa_unif_trace: requires 1 <= p < d/2");
  ExperimentSpec spec{"unit_cube", make_unit_cube(d), p, norm, n_schedule, replications, seed, solver, 1000};
  KappaTrace trace{{}, 0.0, v_rand_estimate(spec, workers)};
  std::vector<double> values;
  for (const auto& est : trace.experiment.per_n) {
    const double s = std::pow(static_cast<double>(est.n), 1.0 / d);
    trace.points.push_back({est.n, s * est.v_hat, s * est.ci_lo, s * est.ci_hi, s * est.v_lower, s * est.v_upper});
    values.push_back(s * est.v_hat);
  }
  trace.stabilization = stabilization_diagnostic(values);
  return trace;
}

}  // namespace wqlab
