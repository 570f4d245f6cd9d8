#pragma once

#include <string>

#include <json.hpp>

#include "wqlab/measures.hpp"

namespace wqlab {

/// Measures serialize as {"type": <tag>, ...fields}. Tags: uniform_box,
/// piecewise_constant, two_point, mixture, product_laplace.
nlohmann::json to_json(const ModelMeasure& m);
/// `where` names the document location in error messages.
ModelMeasure measure_from_json(const nlohmann::json& j, const std::string& where = "measure");

/// {"points": [[x...], ...], "weights": [w...]}; weights default to uniform.
nlohmann::json to_json(const DiscreteMeasure& m);
DiscreteMeasure discrete_from_json(const nlohmann::json& j, const std::string& where = "measure");

/// Typed field access with ConfigError diagnostics naming the field.
const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key, const std::string& where);
double require_number(const nlohmann::json& j, const std::string& key, const std::string& where);
Eigen::VectorXd require_vector(const nlohmann::json& j, const std::string& key, const std::string& where);

}  // namespace wqlab
