// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "wqlab/bounds.hpp"
#include "wqlab/cli.hpp"
#include "wqlab/dyadic.hpp"
#include "wqlab/quantize.hpp"
#include "wqlab/transport.hpp"

using namespace wqlab;
using namespace wqlab::testing;

namespace {

const int kWorkers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
const double kKappaCube = 7.65685;
int failures = 0;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double t : v) x[k++] = t;
  return x;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ------------------------------------------------------------------ 1

void criterion1() {
  Timer t;
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(6));
    const auto mu = random_equal_weight(3, n, rng), nu = random_equal_weight(3, n, rng);
    const double p = k % 2 ? 2.0 : 1.0;
    const Norm norm = norm_at(k / 2);
    worst = std::max(worst, std::abs(rho_exact(mu, nu, p, norm).rho - rho_bruteforce(mu, nu, p, norm)));
  }
  const double secs = t.seconds();
  report(1, worst <= 1e-9 && secs < 30, "max |exact - bruteforce| = " + fmt(worst) + " over 200 instances, " + fmt(secs) + " s");
}

// ------------------------------------------------------------------ 2

void criterion2() {
  Timer t;
  Rng rng(202);
  double tri = 0.0, conv = 0.0, scal = 0.0, inv = 0.0;
  auto rho = [](const DiscreteMeasure& a, const DiscreteMeasure& b, double p, Norm n) { return rho_exact(a, b, p, n).rho; };
  for (int k = 0; k < 200; ++k) {
    const Norm norm = norm_at(k);
    const double p = 1.0 + (k % 3) * 0.75;
    const double mass = 0.5 + rng.uniform();
    auto draw = [&] { return random_weighted(3, 2 + static_cast<Eigen::Index>(rng.below(7)), mass, rng); };

    const auto mu = draw(), nu = draw(), xi = draw();
    tri = std::max(tri, rho(mu, nu, p, norm) - rho(mu, xi, p, norm) - rho(xi, nu, p, norm));

    const double m2 = 0.3 + rng.uniform();
    const auto mu2 = random_weighted(3, 4, m2, rng), nu2 = random_weighted(3, 5, m2, rng);
    conv = std::max(conv, std::pow(rho(mu + mu2, nu + nu2, p, norm), p) - std::pow(rho(mu, nu, p, norm), p) -
                              std::pow(rho(mu2, nu2, p, norm), p));

    const double a = 0.1 + 3.0 * rng.uniform();
    const Eigen::VectorXd shift = random_points(3, 1, rng, 10.0).col(0);
    scal = std::max(scal, std::abs(rho(mu.mapped(a, shift), nu.mapped(a, shift), p, norm) - a * rho(mu, nu, p, norm)));

    const auto kappa = random_weighted(3, 1 + static_cast<Eigen::Index>(rng.below(6)), rng.uniform() + 0.1, rng);
    inv = std::max(inv, std::abs(rho(mu + kappa, nu + kappa, 1.0, norm) - rho(mu, nu, 1.0, norm)));
  }
  const double secs = t.seconds();
  const double worst = std::max({tri, conv, scal, inv});
  report(2, worst <= 1e-8 && secs < 60,
         "violations triangle " + fmt(std::max(tri, 0.0)) + ", convexity " + fmt(std::max(conv, 0.0)) + ", scaling " +
             fmt(scal) + ", p=1 common mass " + fmt(inv) + " (200 instances each), " + fmt(secs) + " s");
}

// ------------------------------------------------------------------ 3

void criterion3() {
  Timer t;
  SolverChoice exact;
  exact.kind = SolverKind::Exact;
  const ExperimentSpec spec{"two-point", make_two_point(vec({0, 0, 0}), vec({1, 0, 0}), 0.5), 1.0, Norm::LInf, {2},
                            10000, 303, exact, 1000};
  const NEstimate est = v_rand_estimate(spec, kWorkers).per_n.front();
  std::vector<std::pair<double, double>> curve;
  for (std::int64_t n = 16; n <= 1024; n *= 2) curve.emplace_back(static_cast<double>(n), two_point_exact(n, 1.0, 0.5, 1.0));
  const double slope = rate_fit(curve).slope;
  const double secs = t.seconds();
  const bool ok = std::abs(est.v_hat - 0.25) <= 3.0 * est.bootstrap_se && slope >= -0.55 && slope <= -0.45 && secs < 60;
  report(3, ok, "V_hat(N=2) = " + fmt(est.v_hat) + " (SE " + fmt(est.bootstrap_se) + ", target 0.25), oracle slope " +
                    fmt(slope) + ", " + fmt(secs) + " s");
}

// ------------------------------------------------------------------ 4, 5

SolverChoice semidiscrete_m5() {
  SolverChoice s;
  s.kind = SolverKind::SemiDiscrete;
  s.grid_level = 5;
  // 2^15 cells times 2048 atoms exceeds the default cap of 2e7.
  s.edge_cap = 7e7;
  return s;
}

const std::vector<std::int64_t> kSchedule = {64, 128, 256, 512, 1024, 2048};

KappaTrace criterion4() {
  Timer t;
  KappaTrace trace = kappa_unif_trace(1.0, 3, Norm::LInf, kSchedule, 50, 404, semidiscrete_m5(), kWorkers);
  std::vector<std::pair<double, double>> pts;
  bool bounded = true;
  std::string brackets;
  for (const auto& est : trace.experiment.per_n) {
    pts.emplace_back(static_cast<double>(est.n), est.v_hat);
    const double bound = kKappaCube * std::pow(static_cast<double>(est.n), -1.0 / 3.0);
    bounded = bounded && est.v_upper <= bound;
    for (const auto& rec : est.records) bounded = bounded && rec.upper <= bound;
    brackets += " " + std::to_string(est.n) + ":" + fmt(est.v_upper) + "<=" + fmt(bound);
  }
  const double slope = rate_fit(pts).slope;
  const double secs = t.seconds();
  report(4, slope >= -0.40 && slope <= -0.27 && bounded && secs < 1200,
         "slope " + fmt(slope) + ", upper brackets" + brackets + ", " + fmt(secs) + " s");
  return trace;
}

void criterion5(const KappaTrace& trace) {
  bool ok = true;
  std::string values;
  for (const auto& pt : trace.points) {
    const double cap = 7.657 + std::ldexp(1.0, -5) * std::cbrt(static_cast<double>(pt.n));
    ok = ok && pt.rescaled > 0.0 && pt.rescaled_lower > 0.0 && pt.rescaled <= cap;
    values += " " + fmt(pt.rescaled);
  }
  ok = ok && trace.stabilization <= 0.10;
  report(5, ok, "rescaled" + values + ", last-3 relative change " + fmt(trace.stabilization));
}

// ------------------------------------------------------------------ 6

void criterion6() {
  Timer t;
  Rng rng(606);
  double worst = INFINITY;
  for (int k = 0; k < 50; ++k) {
    const auto nu = DiscreteMeasure::empirical(
        sample(make_unit_cube(3), 1 + static_cast<Eigen::Index>(rng.below(64)), rng.next()));
    const auto up = dyadic_bound(make_unit_cube(3), nu, 1.0, Norm::LInf, 12).upper_bound;
    const auto sd = semidiscrete(make_unit_cube(3), nu, 1.0, Norm::LInf, 4);
    worst = std::min(worst, up - (sd.estimate - sd.discretization_bound));
  }
  const auto r = dyadic_bound(make_unit_cube(3), DiscreteMeasure::dirac(vec({0, 0, 0})), 1.0, Norm::LInf, 20);
  const double delta = std::abs(r.partial_sum + r.tail_bound - 1.75);
  const double secs = t.seconds();
  report(6, worst >= 0.0 && delta <= 1e-5 && secs < 300,
         "min(upper - semidiscrete lower) = " + fmt(worst) + " over 50 instances, |delta_0 bound - 1.75| = " +
             fmt(delta) + ", " + fmt(secs) + " s");
}

// ------------------------------------------------------------------ 7

std::vector<Box> level_cells(int level) {
  std::vector<Box> cells;
  const std::int64_t per = std::int64_t{1} << level;
  const double side = std::ldexp(1.0, -level);
  for (std::int64_t flat = 0; flat < per * per * per; ++flat) {
    const Eigen::VectorXd lo = vec({static_cast<double>(flat % per), static_cast<double>((flat / per) % per),
                                    static_cast<double>(flat / (per * per))}) *
                               side;
    cells.emplace_back(lo, (lo.array() + side).matrix());
  }
  return cells;
}

double mean_mismatch(int level, std::int64_t n, int reps, std::uint64_t seed) {
  const auto cells = level_cells(level);
  const std::vector<std::int64_t> targets(cells.size(), n / static_cast<std::int64_t>(cells.size()));
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    const PointSet x = sample(make_unit_cube(3), n, derive_seed(seed, 2 * r));
    total += static_cast<double>(resample_coupling(x, cells, targets, make_unit_cube(3), derive_seed(seed, 2 * r + 1)).mismatches);
  }
  return total / reps;
}

void criterion7() {
  Timer t;
  const double a = mean_mismatch(1, 64, 1000, 707), b = mean_mismatch(2, 256, 1000, 708);
  const double secs = t.seconds();
  report(7, a <= std::sqrt(8.0) * 8.0 / 2.0 && b <= 64.0 && secs < 60,
         "mean mismatches K=8,N=64: " + fmt(a) + " (bound 11.3137); K=64,N=256: " + fmt(b) + " (bound 64), " +
             fmt(secs) + " s");
}

// ------------------------------------------------------------------ 8

void criterion8(const KappaTrace& uniform) {
  Timer t;
  const ExperimentSpec lap{"laplace", make_product_laplace(1.0, 3), 1.0, Norm::LInf, kSchedule, 10, 808,
                           semidiscrete_m5(), 1000};
  const ExperimentResult lap_result = v_rand_estimate(lap, kWorkers);
  BoundSelection pierce{BoundKind::Pierce};
  pierce.q = 3.0;
  ExperimentResult unif = uniform.experiment;
  unif.spec.id = "uniform";
  const BoundReport report_rows = check_report({unif, lap_result}, {pierce});
  std::size_t hard = 0;
  double min_slack = INFINITY;
  for (const auto& row : report_rows.rows) {
    hard += row.hard;
    min_slack = std::min(min_slack, row.slack);
  }
  const double secs = t.seconds();
  report(8, report_rows.unsatisfied_hard() == 0 && hard == 2 * kSchedule.size() && secs < 600,
         std::to_string(hard) + " hard rows, " + std::to_string(report_rows.unsatisfied_hard()) +
             " UNSATISFIED, min slack " + fmt(min_slack) + ", " + fmt(secs) + " s (uniform rows reuse criterion 4)");
}

// ------------------------------------------------------------------ 9

void criterion9(const KappaTrace& uniform) {
  Timer t;
  std::vector<double> values(8, 0.0);
  for (std::size_t k = 0; k < 8; k += 2) values[k] = 2.0;  // cells with x < 1/2
  const ModelMeasure half = make_piecewise_constant(3, 1, values);
  const ExperimentSpec spec{"half-cube", half, 1.0, Norm::LInf, {2048}, 50, 909, semidiscrete_m5(), 1000};
  const ExperimentResult r = v_rand_estimate(spec, kWorkers);
  const double v_unit = uniform.experiment.per_n.back().v_hat;
  const double ratio = r.per_n.front().v_hat / v_unit;
  const double target = hr_integral(half, 1.0) / hr_integral(make_unit_cube(3), 1.0);
  BoundSelection hr{BoundKind::HighResolution};
  hr.kappa_hat = uniform.points.back().rescaled;
  hr.tolerance = 0.15;
  const bool soft_row = check_report({r}, {hr}).rows.front().satisfied;
  const double side2 = hr_integral(make_uniform_box(vec({0, 0, 0}), vec({2, 2, 2})), 1.0);
  const double secs = t.seconds();
  report(9, std::abs(ratio / target - 1.0) <= 0.15 && soft_row && side2 == 2.0,
         "ratio at N=2048 " + fmt(ratio) + " vs " + fmt(target) + " (rel. error " + fmt(std::abs(ratio / target - 1.0)) +
             "), side-2 cube scaling " + fmt(side2) + ", " + fmt(secs) + " s");
}

// ------------------------------------------------------------------ 10

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void criterion10() {
  namespace fs = std::filesystem;
  Timer t;
  const fs::path dir = fs::temp_directory_path() / "wqlab_acceptance_10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << R"({
  "master_seed": 1010,
  "measures": {"cube": {"type": "uniform_box", "lower": [0, 0, 0], "upper": [1, 1, 1]}},
  "experiments": [
    {"id": "semi", "measure": "cube", "p": 1, "n_values": [16, 64], "replications": 12, "bootstrap": 300,
     "solver": {"kind": "semidiscrete", "grid_level": 4}},
    {"id": "dyad", "measure": "cube", "p": 2, "norm": "l2", "n_values": [32, 100], "replications": 9,
     "solver": {"kind": "dyadic"}},
    {"id": "tp", "measure": {"type": "two_point", "a": [0, 0, 0], "b": [0, 1, 0], "w": 0.3}, "p": 1,
     "n_values": [5, 50, 500], "replications": 40, "solver": {"kind": "exact"}}
  ]})";
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return wqlab::run(args, sink, sink); };
  const std::string config = (dir / "config.json").string();
  int rc = run({"simulate", "--config", config, "--out", (dir / "w1").string(), "--workers", "1"});
  rc |= run({"simulate", "--config", config, "--out", (dir / "w8").string(), "--workers", "8"});
  rc |= run({"--config", (dir / "w1" / "simulate.manifest.json").string(), "--out", (dir / "re").string(), "--workers", "8"});
  std::size_t compared = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(dir / "w1")) {
    const auto name = entry.path().filename();
    const std::string ref = slurp(entry.path());
    ++compared;
    identical += ref == slurp(dir / "w8" / name) && ref == slurp(dir / "re" / name);
  }
  fs::remove_all(dir);
  const double secs = t.seconds();
  report(10, rc == 0 && compared == 7 && identical == compared,
         std::to_string(identical) + "/" + std::to_string(compared) +
             " files byte-identical across workers 1, 8 and the manifest rerun, " + fmt(secs) + " s" +
             (rc ? " (run failed: " + sink.str() + ")" : ""));
}

}  // namespace

int main() {
  std::cout << "acceptance suite, " << kWorkers << " worker(s)" << std::endl;
  const std::vector<std::function<void()>> before = {criterion1, criterion2, criterion3};
  for (const auto& f : before) f();
  const KappaTrace trace = criterion4();
  criterion5(trace);
  criterion6();
  criterion7();
  criterion8(trace);
  criterion9(trace);
  criterion10();
  std::cout << (failures ? "FAILED: " + std::to_string(failures) + " criteria" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
