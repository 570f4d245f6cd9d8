#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wqlab/measures.hpp"
#include "wqlab/semidiscrete.hpp"

namespace wqlab {

enum class SolverKind { Exact, SemiDiscrete, Dyadic };

std::string to_string(SolverKind kind);
SolverKind parse_solver(const std::string& name);

struct SolverChoice {
  SolverKind kind = SolverKind::SemiDiscrete;
  int grid_level = 5;
  /// Dyadic truncation level; a negative value picks default_dyadic_level.
  int dyadic_level = -1;
  /// Mass left outside the truncation box for unbounded measures.
  double tail_mass = 1e-6;
  double edge_cap = 2e7;
  ExactOptions exact;
};

struct ExperimentSpec {
  std::string id;
  ModelMeasure measure;
  double p = 1.0;
  Norm norm = Norm::LInf;
  std::vector<std::int64_t> n_values;
  int replications = 2;
  std::uint64_t master_seed = 0;
  SolverChoice solver;
  int bootstrap_resamples = 1000;
};

/// Empty when the spec is valid; a warning when p >= d/2, which is allowed.
/// Throws DomainError for invalid specs.
std::optional<std::string> validate(const ExperimentSpec& spec);

struct ReplicationRecord {
  std::int64_t n = 0;
  int rep = 0;
  /// rho_p^p for the exact solver, estimate^p for semidiscrete, upper^p for dyadic.
  double rho_p_pow_p = 0.0;
  /// Bracket on rho_p(mu, empirical measure).
  double lower = 0.0;
  double upper = 0.0;
  std::uint64_t seed = 0;
};

struct NEstimate {
  std::int64_t n = 0;
  /// ((1/R) sum rho^p)^(1/p)
  double v_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  /// Standard deviation of the bootstrap replicates of v_hat.
  double bootstrap_se = 0.0;
  /// ((1/R) sum lower^p)^(1/p) and the same for upper.
  double v_lower = 0.0;
  double v_upper = 0.0;
  std::vector<ReplicationRecord> records;

  double rescaled(int d) const { return std::pow(static_cast<double>(n), 1.0 / d) * v_hat; }
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<NEstimate> per_n;
};

/// Replication r of every N draws from the stream derive_seed(master_seed, r),
/// so the samples for different N share a prefix.
ExperimentResult v_rand_estimate(const ExperimentSpec& spec, int workers = 1);

/// ||a - b|| (E|k/N - w|)^(1/p) with k ~ Binomial(N, w).
double two_point_exact(std::int64_t n, double p, double w, double dist);

struct QuantizerResult {
  PointSet codebook;
  double v_opt = 0.0;
};

/// Lloyd iteration on a fixed sample cloud, best of `restarts` initializations.
QuantizerResult optimal_quantizer(const ModelMeasure& m, Eigen::Index n, double p, Norm norm, Eigen::Index sample_size,
                                  int restarts, int iters, std::uint64_t seed);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

/// Least squares of log V on log N; needs three distinct N and V > 0.
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

struct KappaPoint {
  std::int64_t n = 0;
  double rescaled = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double rescaled_lower = 0.0;
  double rescaled_upper = 0.0;
};

struct KappaTrace {
  std::vector<KappaPoint> points;
  /// Largest relative change between consecutive points among the last three.
  double stabilization = 0.0;
  ExperimentResult experiment;
};

double stabilization_diagnostic(const std::vector<double>& values);

/// N^{1/d} V_N for the uniform law on [0,1)^d. Requires p < d/2.
KappaTrace kappa_unif_trace(double p, int d, Norm norm, const std::vector<std::int64_t>& n_schedule, int replications,
                            std::uint64_t seed, const SolverChoice& solver, int workers = 1);

}  // namespace wqlab
