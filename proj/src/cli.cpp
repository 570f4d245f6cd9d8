#include "wqlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "wqlab/bounds.hpp"
#include "wqlab/csv.hpp"
#include "wqlab/dyadic.hpp"
#include "wqlab/error.hpp"
#include "wqlab/measure_json.hpp"
#include "wqlab/parallel.hpp"
#include "wqlab/quantize.hpp"
#include "wqlab/transport.hpp"

namespace wqlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kSubcommands = {"exact",      "simulate", "rate",   "kappa",       "pierce-check",
                                               "cube-check", "hr-check", "dyadic", "quantize-opt"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << x;
  return os.str();
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ----------------------------------------------------------- config fields

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return require_number(j, key, where);
}

std::int64_t integer_or(const json& j, const std::string& key, std::int64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

std::string string_or(const json& j, const std::string& key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::string require_string(const json& j, const std::string& key, const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

Norm norm_field(const json& j, const std::string& where) {
  const std::string name = string_or(j, "norm", "linf", where);
  try {
    return parse_norm(name);
  } catch (const Error& e) {
    throw ConfigError(where + ".norm: " + e.what());
  }
}

std::uint64_t seed_value(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(where + ": expected a nonnegative integer seed");
}

// A measure is either inline or the name of an entry in "measures".
struct NamedMeasure {
  std::string name;
  ModelMeasure measure;
};

NamedMeasure resolve_measure(const json& config, const json& item, const std::string& where, const std::string& id) {
  const json& ref = require_field(item, "measure", where);
  if (ref.is_string()) {
    const std::string name = ref.get<std::string>();
    if (!config.contains("measures") || !config["measures"].contains(name)) {
      throw ConfigError(where + ".measure: no measure named '" + name + "' under \"measures\"");
    }
    return {name, measure_from_json(config["measures"][name], "measures." + name)};
  }
  return {id, measure_from_json(ref, where + ".measure")};
}

struct Experiment {
  ExperimentSpec spec;
  std::string measure_id;
  json raw;
  std::string where;
};

SolverChoice parse_solver_choice(const json& e, const std::string& where) {
  SolverChoice s;
  if (!e.contains("solver")) return s;
  const json& j = e.at("solver");
  const std::string at = where + ".solver";
  if (!j.is_object()) throw ConfigError(at + ": expected an object");
  try {
    s.kind = parse_solver(string_or(j, "kind", "semidiscrete", at));
  } catch (const DomainError& err) {
    throw ConfigError(at + ".kind: " + err.what());
  }
  s.grid_level = static_cast<int>(integer_or(j, "grid_level", s.grid_level, at));
  s.dyadic_level = static_cast<int>(integer_or(j, "dyadic_level", s.dyadic_level, at));
  s.tail_mass = number_or(j, "tail_mass", s.tail_mass, at);
  s.edge_cap = number_or(j, "edge_cap", s.edge_cap, at);
  s.exact.max_atoms = static_cast<std::size_t>(integer_or(j, "max_atoms", static_cast<std::int64_t>(s.exact.max_atoms), at));
  if (s.grid_level < 0 || s.grid_level > 20) throw ConfigError(at + ".grid_level: must lie in [0, 20]");
  if (!(s.tail_mass > 0.0 && s.tail_mass < 1.0)) throw ConfigError(at + ".tail_mass: must lie in (0, 1)");
  if (!(s.edge_cap > 0.0)) throw ConfigError(at + ".edge_cap: must be positive");
  return s;
}

Experiment parse_experiment(const json& config, const json& e, const std::string& where, std::uint64_t seed,
                            std::ostream& err) {
  if (!e.is_object()) throw ConfigError(where + ": expected an object");
  const std::string id = require_string(e, "id", where);
  NamedMeasure nm = resolve_measure(config, e, where, id);
  std::vector<std::int64_t> ns;
  const json& jn = require_field(e, "n_values", where);
  if (!jn.is_array() || jn.empty()) throw ConfigError(where + ".n_values: expected a nonempty array");
  for (std::size_t k = 0; k < jn.size(); ++k) {
    if (!jn[k].is_number_integer() || jn[k].get<std::int64_t>() < 1) {
      throw ConfigError(where + ".n_values[" + std::to_string(k) + "]: expected a positive integer");
    }
    ns.push_back(jn[k].get<std::int64_t>());
  }
  ExperimentSpec spec{id,
                      std::move(nm.measure),
                      number_or(e, "p", 1.0, where),
                      norm_field(e, where),
                      std::move(ns),
                      static_cast<int>(integer_or(e, "replications", 2, where)),
                      seed,
                      parse_solver_choice(e, where),
                      static_cast<int>(integer_or(e, "bootstrap", 1000, where))};
  try {
    if (auto warning = validate(spec)) err << "warning: " << *warning << '\n';
  } catch (const DomainError& ex) {
    throw ConfigError(where + ": " + ex.what());
  }
  return {std::move(spec), nm.name, e, where};
}

// ------------------------------------------------------------------ runner

struct Invocation {
  std::string subcommand;
  std::string filter;
  json config;
  fs::path out_dir;
  int workers = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

void write_file(Invocation& inv, const std::string& name, const std::string& content) {
  const fs::path path = inv.out_dir / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  inv.outputs.push_back(name);
}

const json& section(const Invocation& inv, const std::string& key) {
  if (!inv.config.contains(key) || !inv.config[key].is_array()) {
    throw ConfigError("config: subcommand '" + inv.subcommand + "' needs an array \"" + key + "\"");
  }
  return inv.config[key];
}

// Items of an array section that pass the --experiment filter.
std::vector<std::pair<const json*, std::string>> selected(const Invocation& inv, const std::string& key) {
  const json& items = section(inv, key);
  std::vector<std::pair<const json*, std::string>> out;
  std::map<std::string, int> seen;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string where = key + "[" + std::to_string(k) + "]";
    const std::string id = require_string(items[k], "id", where);
    if (seen[id]++) throw ConfigError(where + ".id: duplicate id '" + id + "'");
    if (inv.filter.empty() || inv.filter == id) out.emplace_back(&items[k], where);
  }
  if (out.empty()) {
    throw ConfigError("config: no entry of \"" + key + "\"" + (inv.filter.empty() ? "" : " matches '" + inv.filter + "'"));
  }
  return out;
}

std::vector<Experiment> experiments(const Invocation& inv) {
  std::vector<Experiment> out;
  for (const auto& [item, where] : selected(inv, "experiments")) {
    out.push_back(parse_experiment(inv.config, *item, where, inv.seed, *inv.err));
  }
  return out;
}

std::string records_csv(const Experiment& e, const ExperimentResult& r) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"measure_id", "p", "norm", "N", "rep", "rho_p_pow_p", "lower", "upper", "seed"});
  for (const auto& est : r.per_n) {
    for (const auto& rec : est.records) {
      csv.field(e.measure_id).field(e.spec.p).field(to_string(e.spec.norm)).field(rec.n).field(rec.rep);
      csv.field(rec.rho_p_pow_p).field(rec.lower).field(rec.upper).field(rec.seed);
      csv.end_row();
    }
  }
  return os.str();
}

std::string summary_csv(const Experiment& e, const ExperimentResult& r) {
  std::ostringstream os;
  CsvWriter csv(os);
  csv.header({"measure_id", "p", "norm", "N", "V_hat", "ci_lo", "ci_hi", "rescaled"});
  const int d = e.spec.measure.dim();
  for (const auto& est : r.per_n) {
    csv.field(e.measure_id).field(e.spec.p).field(to_string(e.spec.norm)).field(est.n);
    csv.field(est.v_hat).field(est.ci_lo).field(est.ci_hi).field(est.rescaled(d));
    csv.end_row();
  }
  return os.str();
}

void cmd_exact(Invocation& inv) {
  for (const auto& [item, where] : selected(inv, "exact")) {
    const json& j = *item;
    const std::string id = require_string(j, "id", where);
    const DiscreteMeasure mu = discrete_from_json(require_field(j, "mu", where), where + ".mu");
    const DiscreteMeasure nu = discrete_from_json(require_field(j, "nu", where), where + ".nu");
    if (mu.dim() != nu.dim()) throw ConfigError(where + ": mu and nu differ in dimension");
    const double p = number_or(j, "p", 1.0, where);
    if (!(p >= 1.0)) throw ConfigError(where + ".p: must be >= 1");
    ExactOptions opts;
    opts.max_atoms = static_cast<std::size_t>(integer_or(j, "max_atoms", static_cast<std::int64_t>(opts.max_atoms), where));
    TransportResult r;
    try {
      r = rho_exact(mu, nu, p, norm_field(j, where), opts);
    } catch (const InfeasibleError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    std::ostringstream os;
    write_plan_csv(os, r.plan);
    write_file(inv, id + ".exact.csv", os.str());
    *inv.out << id << ": rho = " << format_double(r.rho) << '\n';
  }
}

void cmd_simulate(Invocation& inv) {
  for (const auto& e : experiments(inv)) {
    const ExperimentResult r = v_rand_estimate(e.spec, inv.workers);
    write_file(inv, e.spec.id + ".simulate.csv", records_csv(e, r));
    write_file(inv, e.spec.id + ".summary.csv", summary_csv(e, r));
    *inv.out << e.spec.id << ": " << r.per_n.size() << " N values, " << e.spec.replications << " replications\n";
  }
}

void cmd_rate(Invocation& inv) {
  for (const auto& e : experiments(inv)) {
    const ExperimentResult r = v_rand_estimate(e.spec, inv.workers);
    std::vector<std::pair<double, double>> pts;
    for (const auto& est : r.per_n) pts.emplace_back(static_cast<double>(est.n), est.v_hat);
    RateFit fit;
    try {
      fit = rate_fit(pts);
    } catch (const DomainError& ex) {
      throw ConfigError(e.where + ": " + ex.what());
    }
    std::ostringstream os;
    CsvWriter csv(os);
    csv.header({"measure_id", "p", "norm", "n_points", "slope", "intercept", "stderr_slope"});
    csv.field(e.measure_id).field(e.spec.p).field(to_string(e.spec.norm)).field(static_cast<std::int64_t>(pts.size()));
    csv.field(fit.slope).field(fit.intercept).field(fit.stderr_slope);
    csv.end_row();
    write_file(inv, e.spec.id + ".rate.csv", os.str());
    *inv.out << e.spec.id << ": slope = " << format_double(fit.slope) << " +- " << format_double(fit.stderr_slope)
             << '\n';
  }
}

KappaTrace trace_for(const Experiment& e, int workers) {
  const auto* u = e.spec.measure.get_if<UniformBox>();
  const int d = e.spec.measure.dim();
  if (!u || !(u->box.lower.array() == 0.0).all() || !(u->box.upper.array() == 1.0).all()) {
    throw ConfigError(e.where + ".measure: kappa traces need the uniform law on [0,1)^d");
  }
  if (!(e.spec.p < 0.5 * d)) throw ConfigError(e.where + ".p: kappa traces need p < d/2");
  return kappa_unif_trace(e.spec.p, d, e.spec.norm, e.spec.n_values, e.spec.replications, e.spec.master_seed,
                          e.spec.solver, workers);
}

void cmd_kappa(Invocation& inv) {
  for (const auto& e : experiments(inv)) {
    const KappaTrace t = trace_for(e, inv.workers);
    std::ostringstream os;
    CsvWriter csv(os);
    csv.header({"measure_id", "p", "norm", "N", "rescaled", "ci_lo", "ci_hi", "rescaled_lower", "rescaled_upper",
                "stabilization"});
    for (const auto& pt : t.points) {
      csv.field(e.measure_id).field(e.spec.p).field(to_string(e.spec.norm)).field(pt.n).field(pt.rescaled);
      csv.field(pt.ci_lo).field(pt.ci_hi).field(pt.rescaled_lower).field(pt.rescaled_upper).field(t.stabilization);
      csv.end_row();
    }
    write_file(inv, e.spec.id + ".kappa.csv", os.str());
    *inv.out << e.spec.id << ": last rescaled = " << format_double(t.points.back().rescaled)
             << ", stabilization = " << format_double(t.stabilization) << '\n';
  }
}

void cmd_check(Invocation& inv, BoundKind kind) {
  for (const auto& e : experiments(inv)) {
    BoundSelection sel;
    sel.kind = kind;
    sel.q = number_or(e.raw, "q", 3.0, e.where);
    sel.tolerance = number_or(e.raw, "hr_tolerance", sel.tolerance, e.where);
    const int d = e.spec.measure.dim();
    try {
      if (kind == BoundKind::Cube) kappa_cube(e.spec.p, d, e.spec.norm);
      if (kind == BoundKind::Pierce) kappa_pierce(e.spec.p, sel.q, d, Norm::LInf);
    } catch (const RegimeError& ex) {
      throw ConfigError(e.where + ": " + ex.what());
    }
    if (kind == BoundKind::HighResolution) {
      if (e.raw.contains("kappa_hat")) {
        sel.kappa_hat = require_number(e.raw, "kappa_hat", e.where);
      } else {
        ExperimentSpec cube = e.spec;
        cube.measure = make_unit_cube(d);
        Experiment ref{cube, "unit_cube", e.raw, e.where};
        sel.kappa_hat = trace_for(ref, inv.workers).points.back().rescaled;
      }
    }
    const ExperimentResult r = v_rand_estimate(e.spec, inv.workers);
    BoundReport report = check_report({r}, {sel});
    std::ostringstream os;
    write_report_csv(os, report);
    write_file(inv, e.spec.id + "." + inv.subcommand + ".csv", os.str());
    write_report_table(*inv.out, report);
  }
}

void cmd_dyadic(Invocation& inv) {
  for (const auto& [item, where] : selected(inv, "dyadic")) {
    const json& j = *item;
    const std::string id = require_string(j, "id", where);
    const NamedMeasure nm = resolve_measure(inv.config, j, where, id);
    const double p = number_or(j, "p", 1.0, where);
    DiscreteMeasure nu;
    if (j.contains("nu")) {
      nu = discrete_from_json(j.at("nu"), where + ".nu");
    } else {
      const std::int64_t n = integer_or(j, "sample_n", 0, where);
      if (n < 1) throw ConfigError(where + ": needs \"nu\" or a positive \"sample_n\"");
      nu = DiscreteMeasure::empirical(sample(nm.measure, n, inv.seed));
    }
    const int levels = static_cast<int>(integer_or(j, "levels", default_dyadic_level(nu.size(), nu.dim()), where));
    DyadicBoundResult r;
    try {
      r = dyadic_bound(nm.measure, nu, p, norm_field(j, where), levels);
    } catch (const DomainError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    std::ostringstream os;
    CsvWriter csv(os);
    csv.header({"measure_id", "partial_sum", "tail_bound", "upper_bound", "levels_used"});
    csv.field(nm.name).field(r.partial_sum).field(r.tail_bound).field(r.upper_bound).field(r.levels_used);
    csv.end_row();
    write_file(inv, id + ".dyadic.csv", os.str());
    *inv.out << to_json(r).dump() << '\n';
  }
}

void cmd_quantize(Invocation& inv) {
  for (const auto& e : experiments(inv)) {
    const json q = e.raw.value("quantize", json::object());
    const std::string at = e.where + ".quantize";
    const std::int64_t factor = integer_or(q, "sample_factor", 100, at);
    const int restarts = static_cast<int>(integer_or(q, "restarts", 3, at));
    const int iters = static_cast<int>(integer_or(q, "iters", 100, at));
    if (factor < 100 || restarts < 1 || iters < 1) {
      throw ConfigError(at + ": needs sample_factor >= 100, restarts >= 1 and iters >= 1");
    }
    const auto& ns = e.spec.n_values;
    std::vector<double> v(ns.size());
    parallel_for(ns.size(), inv.workers, [&](std::size_t k) {
      v[k] = optimal_quantizer(e.spec.measure, ns[k], e.spec.p, e.spec.norm, factor * ns[k], restarts, iters,
                               derive_seed(e.spec.master_seed, static_cast<std::uint64_t>(ns[k])))
                 .v_opt;
    });
    std::ostringstream os;
    CsvWriter csv(os);
    csv.header({"measure_id", "p", "norm", "N", "V_opt"});
    for (std::size_t k = 0; k < ns.size(); ++k) {
      csv.field(e.measure_id).field(e.spec.p).field(to_string(e.spec.norm)).field(ns[k]).field(v[k]);
      csv.end_row();
    }
    write_file(inv, e.spec.id + ".quantize-opt.csv", os.str());
    *inv.out << e.spec.id << ": " << ns.size() << " codebooks\n";
  }
}

void dispatch(Invocation& inv) {
  const std::string& s = inv.subcommand;
  if (s == "exact") return cmd_exact(inv);
  if (s == "simulate") return cmd_simulate(inv);
  if (s == "rate") return cmd_rate(inv);
  if (s == "kappa") return cmd_kappa(inv);
  if (s == "pierce-check") return cmd_check(inv, BoundKind::Pierce);
  if (s == "cube-check") return cmd_check(inv, BoundKind::Cube);
  if (s == "hr-check") return cmd_check(inv, BoundKind::HighResolution);
  if (s == "dyadic") return cmd_dyadic(inv);
  if (s == "quantize-opt") return cmd_quantize(inv);
  throw ConfigError("unknown subcommand '" + s + "'");
}

int resolve_workers(std::optional<int> flag) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--workers: must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("WQLAB_WORKERS")) {
    char* end = nullptr;
    const long w = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || w < 1) throw ConfigError("WQLAB_WORKERS: expected a positive integer");
    return static_cast<int>(w);
  }
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

void write_manifest(Invocation& inv) {
  json m;
  m["wqlab_manifest"] = 1;
  m["subcommand"] = inv.subcommand;
  m["experiment"] = inv.filter;
  m["master_seed"] = inv.seed;
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a(inv.config.dump()));
  m["versions"] = {{"wqlab", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m["outputs"] = inv.outputs;
  m["config"] = inv.config;
  const fs::path path = inv.out_dir / (inv.subcommand + ".manifest.json");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << m.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random quantization experiments: exact transport, bounds and Monte Carlo rates", "wqlab"};
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string filter;
  app.add_option("subcommand", subcommand, "exact | simulate | rate | kappa | pierce-check | cube-check | hr-check | "
                                           "dyadic | quantize-opt (optional when --config is a manifest)");
  app.add_option("--config", config_path, "JSON experiment file or manifest")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads (fallback: WQLAB_WORKERS)");
  app.add_option("--seed", seed, "override of master_seed");
  app.add_option("--experiment", filter, "run only the entry with this id");
  app.add_flag_callback("--version", [&out] {
    out << "wqlab " << kVersion << '\n';
    throw CLI::Success();
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Invocation inv;
    inv.out = &out;
    inv.err = &err;
    inv.out_dir = out_dir;
    json doc = load_json(config_path);
    if (!doc.is_object()) throw ConfigError(config_path + ": expected a JSON object");
    if (doc.contains("wqlab_manifest")) {
      if (subcommand.empty()) subcommand = string_or(doc, "subcommand", "", "manifest");
      if (filter.empty()) filter = string_or(doc, "experiment", "", "manifest");
      doc = require_field(doc, "config", "manifest");
    }
    if (subcommand.empty()) throw ConfigError("missing subcommand");
    if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end()) {
      throw ConfigError("unknown subcommand '" + subcommand + "'");
    }
    if (seed) {
      doc["master_seed"] = *seed;
    } else if (!doc.contains("master_seed")) {
      throw ConfigError(config_path + ": missing field 'master_seed'");
    }
    inv.seed = seed_value(doc["master_seed"], "master_seed");
    inv.subcommand = subcommand;
    inv.filter = filter;
    inv.config = std::move(doc);
    inv.workers = resolve_workers(workers);
    fs::create_directories(inv.out_dir);
    dispatch(inv);
    write_manifest(inv);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace wqlab
