#pragma once

// Metric specification documents (JSON, one metric per document).
//
//   {"family": "randers", "dimension": 2, "b": [0.1, 0.0]}
//   {"family": "riemannian_closed_form", "dimension": 3, "form": "sphere", "radius": 1}
//   {"family": "product", "dimension": 3,
//    "factors": [{"family": "riemannian_closed_form", "dimension": 2, "radius": 1},
//                {"family": "euclidean", "dimension": 1}]}

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "finsler/errors.hpp"
#include "finsler/metric.hpp"

namespace finsler {

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline int line_of_field(const std::string& text, const std::string& field) {
  const auto pos = text.find('"' + field + '"');
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

inline Family family_from(const std::string& s, const std::string& text) {
  static const std::pair<const char*, Family> names[] = {
      {"euclidean", Family::euclidean},         {"riemannian_closed_form", Family::riemannian_closed_form},
      {"randers", Family::randers},             {"minkowski_quartic", Family::minkowski_quartic},
      {"funk_disk", Family::funk_disk},         {"product", Family::product}};
  for (const auto& [n, f] : names)
    if (s == n) return f;
  throw SpecParseError(line_of_field(text, "family"), "family", "unknown family '" + s + "'");
}

inline MetricSpec spec_from_json(const nlohmann::json& j, const std::string& text, bool top_level) {
  using nlohmann::json;
  if (!j.is_object()) throw SpecParseError(1, "", "metric spec must be a JSON object");
  static const std::set<std::string> known = {"family", "dimension", "form", "radius", "b", "b_gradient", "epsilon", "factors"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw SpecParseError(line_of_field(text, key), key, "unknown field '" + key + "'");

  auto fail = [&](const std::string& field, const std::string& what) -> SpecParseError {
    return SpecParseError(line_of_field(text, field), field, what);
  };
  auto number = [&](const std::string& field) {
    const auto& v = j.at(field);
    if (!v.is_number()) throw fail(field, field + " must be a number");
    return v.get<double>();
  };

  MetricSpec s;
  if (!j.contains("family")) throw fail("family", "missing field 'family'");
  if (!j["family"].is_string()) throw fail("family", "family must be a string");
  s.family = family_from(j["family"].get<std::string>(), text);
  if (!j.contains("dimension")) throw fail("dimension", "missing field 'dimension'");
  if (!j["dimension"].is_number_integer()) throw fail("dimension", "dimension must be an integer");
  s.dimension = j["dimension"].get<int>();

  auto only_for = [&](const std::string& field, std::initializer_list<Family> fams) {
    if (j.contains(field) && std::find(fams.begin(), fams.end(), s.family) == fams.end())
      throw fail(field, "field '" + field + "' is not valid for family " + to_string(s.family));
  };
  only_for("form", {Family::riemannian_closed_form});
  only_for("radius", {Family::riemannian_closed_form});
  only_for("b", {Family::randers});
  only_for("b_gradient", {Family::randers});
  only_for("epsilon", {Family::minkowski_quartic});
  only_for("factors", {Family::product});

  if (j.contains("form")) {
    const auto& f = j["form"];
    if (f == "sphere")
      s.form = ClosedForm::sphere;
    else if (f == "poincare_ball")
      s.form = ClosedForm::poincare_ball;
    else
      throw fail("form", "form must be \"sphere\" or \"poincare_ball\"");
  }
  if (j.contains("radius")) s.radius = number("radius");
  if (j.contains("epsilon")) s.epsilon = number("epsilon");
  if (j.contains("b")) {
    if (!j["b"].is_array()) throw fail("b", "b must be an array of numbers");
    for (const auto& e : j["b"]) {
      if (!e.is_number()) throw fail("b", "b must be an array of numbers");
      s.b.push_back(e.get<double>());
    }
  } else if (s.family == Family::randers) {
    throw fail("b", "missing field 'b'");
  }
  if (j.contains("b_gradient")) {
    const auto& m = j["b_gradient"];
    if (!m.is_array() || static_cast<int>(m.size()) != s.dimension)
      throw fail("b_gradient", "b_gradient must be a dimension x dimension array");
    for (const auto& row : m) {
      if (!row.is_array() || static_cast<int>(row.size()) != s.dimension)
        throw fail("b_gradient", "b_gradient must be a dimension x dimension array");
      for (const auto& e : row) {
        if (!e.is_number()) throw fail("b_gradient", "b_gradient entries must be numbers");
        s.b_gradient.push_back(e.get<double>());
      }
    }
  }
  if (j.contains("factors")) {
    if (!j["factors"].is_array()) throw fail("factors", "factors must be an array of specs");
    for (const auto& f : j["factors"]) s.factors.push_back(spec_from_json(f, text, false));
  } else if (s.family == Family::product) {
    throw fail("factors", "missing field 'factors'");
  }

  if (top_level) {
    try {
      check_spec(s);
    } catch (const ParameterError& e) {
      throw SpecParseError(line_of_field(text, e.field()), e.field(), e.what());
    }
  }
  return s;
}

}  // namespace detail

/// Parses a metric spec document; every invariant of the family is checked.
/// Throws SpecParseError carrying the line and field of the problem.
inline MetricSpec parse_metric_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecParseError(detail::line_of_offset(text, e.byte), "", std::string("malformed document: ") + e.what());
  }
  return detail::spec_from_json(j, text, true);
}

inline MetricSpec load_metric_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecParseError(0, "", "cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metric_spec(ss.str());
}

inline nlohmann::ordered_json spec_to_json(const MetricSpec& s) {
  nlohmann::ordered_json j;
  j["family"] = to_string(s.family);
  j["dimension"] = s.dimension;
  switch (s.family) {
    case Family::riemannian_closed_form:
      j["form"] = to_string(s.form);
      j["radius"] = s.radius;
      break;
    case Family::randers:
      j["b"] = s.b;
      if (!s.b_gradient.empty()) {
        auto rows = nlohmann::ordered_json::array();
        for (int i = 0; i < s.dimension; ++i)
          rows.push_back(std::vector<double>(s.b_gradient.begin() + i * s.dimension,
                                             s.b_gradient.begin() + (i + 1) * s.dimension));
        j["b_gradient"] = rows;
      }
      break;
    case Family::minkowski_quartic: j["epsilon"] = s.epsilon; break;
    case Family::product: {
      auto fs = nlohmann::ordered_json::array();
      for (const auto& f : s.factors) fs.push_back(spec_to_json(f));
      j["factors"] = fs;
      break;
    }
    default: break;
  }
  return j;
}

}  // namespace finsler
