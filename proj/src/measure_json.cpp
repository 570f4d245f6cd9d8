#include "wqlab/measure_json.hpp"

#include "wqlab/error.hpp"

namespace wqlab {

using nlohmann::json;

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ConfigError(where + "[" + std::to_string(k) + "]: expected a number");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

int require_int(const json& j, const std::string& key, const std::string& where) {
  const json& f = require_field(j, key, where);
  if (!f.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return f.get<int>();
}

}  // namespace

const json& require_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

double require_number(const json& j, const std::string& key, const std::string& where) {
  const json& f = require_field(j, key, where);
  if (!f.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return f.get<double>();
}

Eigen::VectorXd require_vector(const json& j, const std::string& key, const std::string& where) {
  return parse_vector(require_field(j, key, where), where + "." + key);
}

json to_json(const ModelMeasure& m) {
  json j;
  if (const auto* u = m.get_if<UniformBox>()) {
    j["type"] = "uniform_box";
    j["lower"] = vector_json(u->box.lower);
    j["upper"] = vector_json(u->box.upper);
  } else if (const auto* pc = m.get_if<PiecewiseConstantDensity>()) {
    j["type"] = "piecewise_constant";
    j["dim"] = pc->dim;
    j["level"] = pc->level;
    j["values"] = pc->values;
  } else if (const auto* tp = m.get_if<TwoPoint>()) {
    j["type"] = "two_point";
    j["a"] = vector_json(tp->a);
    j["b"] = vector_json(tp->b);
    j["w"] = tp->w;
  } else if (const auto* mix = m.get_if<Mixture>()) {
    j["type"] = "mixture";
    j["weights"] = mix->weights;
    j["components"] = json::array();
    for (const auto& c : mix->components) j["components"].push_back(to_json(c));
  } else if (const auto* pl = m.get_if<ProductLaplace>()) {
    j["type"] = "product_laplace";
    j["scale"] = pl->scale;
    j["dim"] = pl->dim;
  }
  return j;
}

ModelMeasure measure_from_json(const json& j, const std::string& where) {
  const json& type = require_field(j, "type", where);
  if (!type.is_string()) throw ConfigError(where + ".type: expected a string");
  const std::string tag = type.get<std::string>();
  try {
    if (tag == "uniform_box") {
      return make_uniform_box(require_vector(j, "lower", where), require_vector(j, "upper", where));
    }
    if (tag == "piecewise_constant") {
      const json& values = require_field(j, "values", where);
      if (!values.is_array()) throw ConfigError(where + ".values: expected an array");
      std::vector<double> v;
      for (std::size_t k = 0; k < values.size(); ++k) {
        if (!values[k].is_number()) throw ConfigError(where + ".values[" + std::to_string(k) + "]: expected a number");
        v.push_back(values[k].get<double>());
      }
      return make_piecewise_constant(require_int(j, "dim", where), require_int(j, "level", where), std::move(v));
    }
    if (tag == "two_point") {
      return make_two_point(require_vector(j, "a", where), require_vector(j, "b", where),
                            require_number(j, "w", where));
    }
    if (tag == "mixture") {
      const json& comps = require_field(j, "components", where);
      if (!comps.is_array()) throw ConfigError(where + ".components: expected an array");
      Eigen::VectorXd w = require_vector(j, "weights", where);
      std::vector<ModelMeasure> parts;
      for (std::size_t k = 0; k < comps.size(); ++k) {
        parts.push_back(measure_from_json(comps[k], where + ".components[" + std::to_string(k) + "]"));
      }
      return make_mixture(std::vector<double>(w.data(), w.data() + w.size()), std::move(parts));
    }
    if (tag == "product_laplace") {
      return make_product_laplace(require_number(j, "scale", where), require_int(j, "dim", where));
    }
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ".type: unknown measure type '" + tag + "'");
}

json to_json(const DiscreteMeasure& m) {
  json pts = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) pts.push_back(vector_json(m.point(i)));
  return json{{"points", pts}, {"weights", vector_json(m.weights())}};
}

DiscreteMeasure discrete_from_json(const json& j, const std::string& where) {
  const json& pts = require_field(j, "points", where);
  if (!pts.is_array() || pts.empty()) throw ConfigError(where + ".points: expected a nonempty array");
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd first = parse_vector(pts[0], where + ".points[0]");
  PointSet points(first.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string at = where + ".points[" + std::to_string(i) + "]";
    Eigen::VectorXd x = parse_vector(pts[static_cast<std::size_t>(i)], at);
    if (x.size() != first.size()) throw ConfigError(at + ": dimension mismatch");
    points.col(i) = x;
  }
  try {
    if (j.contains("weights")) {
      Eigen::VectorXd w = require_vector(j, "weights", where);
      if (w.size() != n) throw ConfigError(where + ".weights: expected one weight per point");
      return DiscreteMeasure(std::move(points), std::move(w));
    }
    return DiscreteMeasure::empirical(std::move(points));
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace wqlab
