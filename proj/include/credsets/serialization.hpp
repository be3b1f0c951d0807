#pragma once

#include <cstddef>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "credsets/credible_sets.hpp"
#include "credsets/norms.hpp"
#include "credsets/signal_classes.hpp"

namespace credsets {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent user input (config files, params files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace json_detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!names.count(item.key())) throw ConfigError(where + ": unknown field \"" + item.key() + "\"");
}

inline const Json& require(const Json& j, const char* field, const std::string& where) {
  if (!j.contains(field)) throw ConfigError(where + ": missing required field \"" + std::string(field) + "\"");
  return j.at(field);
}

inline double number(const Json& j, const char* field, const std::string& where) {
  const auto& v = require(j, field, where);
  if (!v.is_number()) throw ConfigError(where + ": field \"" + std::string(field) + "\" must be a number");
  return v.get<double>();
}

inline double number_or(const Json& j, const char* field, double fallback, const std::string& where) {
  return j.contains(field) ? number(j, field, where) : fallback;
}

inline std::size_t count(const Json& j, const char* field, const std::string& where) {
  const auto& v = require(j, field, where);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(where + ": field \"" + std::string(field) + "\" must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::size_t count_or(const Json& j, const char* field, std::size_t fallback, const std::string& where) {
  return j.contains(field) ? count(j, field, where) : fallback;
}

inline std::vector<double> numbers(const Json& j, const char* field, const std::string& where) {
  const auto& v = require(j, field, where);
  if (!v.is_array()) throw ConfigError(where + ": field \"" + std::string(field) + "\" must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + ": field \"" + std::string(field) + "\" must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace json_detail

/// {"name": ..., "weights": [...]} with default specs named by family.
inline Json to_json(const NormSpec& norm) {
  Json j;
  j["name"] = norm.name();
  if (norm.is_ellipsoid()) {
    j["delta"] = norm.ellipsoid_spec().delta();
    j["weights"] = std::vector<double>(norm.ellipsoid_spec().weights().begin(), norm.ellipsoid_spec().weights().end());
  } else if (norm.is_multiscale()) {
    j["weights"] =
        std::vector<double>(norm.multiscale_spec().weights().begin(), norm.multiscale_spec().weights().end());
  }
  return j;
}

/// Builds a norm for K coefficients from {"name": "l2" | "default-ellipsoid" |
/// "default-multiscale" | "ellipsoid" | "multiscale", "weights": [...], "delta": x}.
inline NormSpec norm_from_json(const Json& j, std::size_t K) {
  using namespace json_detail;
  const std::string where = "norm";
  reject_unknown(j, {"name", "weights", "weights_csv", "delta"}, where);
  const auto& name_field = require(j, "name", where);
  if (!name_field.is_string()) throw ConfigError("norm: \"name\" must be a string");
  const auto name = name_field.get<std::string>();
  try {
    if (name == "l2" || name == "default-ellipsoid" || name == "default-multiscale") {
      if (j.contains("weights") || j.contains("weights_csv"))
        throw ConfigError("norm: \"" + name + "\" takes no explicit weights");
      return default_norm(name, K);
    }
    std::vector<double> weights;
    if (j.contains("weights") == j.contains("weights_csv"))
      throw ConfigError("norm: \"" + name + "\" needs exactly one of \"weights\" or \"weights_csv\"");
    if (j.contains("weights")) {
      weights = numbers(j, "weights", where);
    } else {
      const auto table = csv::read_file(j.at("weights_csv").get<std::string>());
      weights = weights_from_table(table, name == "ellipsoid" ? 1 : 0);
    }
    if (name == "ellipsoid")
      return NormSpec::ellipsoid(EllipsoidWeightSpec(std::move(weights), number_or(j, "delta", EllipsoidWeightSpec::kDefaultDelta, where)));
    if (name == "multiscale") return NormSpec::multiscale(MultiscaleWeightSpec(std::move(weights)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("norm: ") + e.what());
  }
  throw ConfigError("norm: unknown name \"" + name + "\"");
}

/// {norm, alpha, radius, blowup, center_ref}. The center itself is stored
/// elsewhere (e.g. a posterior CSV) and referenced by name.
inline Json to_json(const CredibleBall& ball, const std::string& center_ref) {
  Json j;
  j["norm"] = to_json(ball.norm);
  j["alpha"] = ball.alpha;
  j["radius"] = ball.radius;
  j["blowup"] = ball.blowup;
  j["center_ref"] = center_ref;
  return j;
}

inline Json to_json(const CheckResult& r) {
  Json j;
  j["pass"] = r.pass;
  j["first_violation_N"] = r.first_violation ? Json(*r.first_violation) : Json(nullptr);
  j["checked_range"] = Json::array({r.checked_from, r.checked_to});
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

/// Runs the class check named in `params["condition"]` and returns
/// {condition, params, pass, first_violation_N, checked_range}.
inline Json check_class_verdict(const SignalVector& theta, const Json& params) {
  using namespace json_detail;
  const std::string where = "params";
  const auto& cond_field = require(params, "condition", where);
  if (!cond_field.is_string()) throw ConfigError("params: \"condition\" must be a string");
  const auto condition = cond_field.get<std::string>();
  auto start = [&] { return std::max<std::size_t>(1, count_or(params, "N0", 1, where)); };

  CheckResult result;
  try {
    if (condition == "sobolev_ball") {
      reject_unknown(params, {"condition", "beta", "B"}, where);
      const double beta = number(params, "beta", where);
      const bool inside = in_sobolev_ball(theta, beta, number(params, "B", where));
      result = CheckResult{inside, std::nullopt, 0, 0, inside ? "" : "outside Sobolev ball"};
    } else if (condition == "tail_bound") {
      reject_unknown(params, {"condition", "beta"}, where);
      result = check_tail_bound(theta, number(params, "beta", where));
    } else if (condition == "self_similar") {
      reject_unknown(params, {"condition", "beta", "B", "epsilon", "rho", "N0"}, where);
      SelfSimilarParams p;
      p.beta = number(params, "beta", where);
      p.radius = number_or(params, "B", p.radius, where);
      p.epsilon = number(params, "epsilon", where);
      p.rho = number(params, "rho", where);
      p.start = start();
      result = check_self_similar(theta, p);
    } else if (condition == "polished_tail") {
      reject_unknown(params, {"condition", "L0", "rho", "N0"}, where);
      PolishedTailParams p;
      p.tail_constant = number(params, "L0", where);
      p.rho = number(params, "rho", where);
      p.start = start();
      result = check_polished_tail(theta, p);
    } else if (condition == "relaxed_self_similar") {
      reject_unknown(params, {"condition", "beta", "B", "b", "epsilon", "N0"}, where);
      RelaxedSelfSimilarParams p;
      p.beta = number(params, "beta", where);
      p.radius = number(params, "B", where);
      p.lower_radius = number_or(params, "b", 0.0, where);
      p.epsilon = number(params, "epsilon", where);
      p.start = start();
      result = check_relaxed_self_similar(theta, p);
    } else {
      throw ConfigError("params: unknown condition \"" + condition + "\"");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }

  Json verdict;
  verdict["condition"] = condition;
  verdict["params"] = params;
  const Json fields = to_json(result);
  for (const auto& item : fields.items()) verdict[item.key()] = item.value();
  return verdict;
}

}  // namespace credsets
