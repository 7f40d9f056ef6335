#ifndef PIDEBS_CONFIG_HPP
#define PIDEBS_CONFIG_HPP

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pidebs/errors.hpp"
#include "pidebs/expression.hpp"
#include "pidebs/field.hpp"
#include "pidebs/kernel/solver.hpp"
#include "pidebs/model.hpp"

namespace pidebs {

struct SimSettings {
  int n_z = 102;
  double t_end = 4.0;
  double dt = 1e-3;
  int snapshot_stride = 10;
  std::vector<Field1> x0;
};

/// Parsed and probed configuration document.
struct ConfigDocument {
  PlantModel plant;
  TargetSpec target;
  SolverOptions solver;
  SimSettings sim;
};

namespace detail {

using nlohmann::json;

inline Expression parse_expression(const json& v, const std::string& where) {
  std::string text;
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    text = os.str();
  } else if (v.is_string()) {
    text = v.get<std::string>();
  } else {
    throw ParseError(where + ": expected a number or an expression string");
  }
  try {
    return Expression::parse(text);
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline bool is_constant(const Expression& e) { return !e.uses("z") && !e.uses("zeta") && !e.uses("eta"); }

inline Field1 field1(const json& v, const std::string& where, const char* var = "z") {
  const auto e = parse_expression(v, where);
  if (e.uses("zeta") || e.uses(std::string_view(var) == "z" ? "eta" : "z"))
    throw ParseError(where + ": expression may only depend on " + std::string(var));
  if (is_constant(e)) return Field1::constant(e(0.0));
  if (std::string_view(var) == "eta") return Field1([e](double x) { return e(0.0, 0.0, x); });
  return Field1([e](double z) { return e(z); });
}

inline Field2 field2(const json& v, const std::string& where) {
  const auto e = parse_expression(v, where);
  if (e.uses("eta")) throw ParseError(where + ": expression may only depend on z and zeta");
  if (is_constant(e)) return Field2::constant(e(0.0));
  return Field2([e](double z, double zeta) { return e(z, zeta); });
}

inline const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  return obj.at(key);
}

inline std::vector<double> numbers(const json& v, int n, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  if (static_cast<int>(v.size()) != n) throw DimensionMismatch(where + ": expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ParseError(where + "[" + std::to_string(k) + "]: expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

inline Eigen::MatrixXd number_matrix(const json& v, int n, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of rows");
  if (static_cast<int>(v.size()) != n) throw DimensionMismatch(where + ": expected " + std::to_string(n) + " rows, got " + std::to_string(v.size()));
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r) {
    const auto row = numbers(v[static_cast<std::size_t>(r)], n, where + "[" + std::to_string(r) + "]");
    for (int c = 0; c < n; ++c) m(r, c) = row[c];
  }
  return m;
}

template <typename M, typename Make>
M field_matrix(const json& obj, const char* key, int n, const std::string& where, Make make) {
  M m(n);
  if (!obj.contains(key)) return m;
  const auto& v = obj.at(key);
  const std::string w = where + "." + key;
  if (!v.is_array()) throw ParseError(w + ": expected an array of rows");
  if (static_cast<int>(v.size()) != n) throw DimensionMismatch(w + ": expected " + std::to_string(n) + " rows, got " + std::to_string(v.size()));
  for (int r = 0; r < n; ++r) {
    const auto& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array()) throw ParseError(w + "[" + std::to_string(r) + "]: expected an array");
    if (static_cast<int>(row.size()) != n)
      throw DimensionMismatch(w + "[" + std::to_string(r) + "]: expected " + std::to_string(n) + " entries, got " + std::to_string(row.size()));
    for (int c = 0; c < n; ++c) m(r, c) = make(row[static_cast<std::size_t>(c)], w + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

inline std::vector<Field1> field_vector(const json& v, int n, const std::string& where, const char* var = "z") {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  if (static_cast<int>(v.size()) != n) throw DimensionMismatch(where + ": expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  std::vector<Field1> out;
  for (int k = 0; k < n; ++k) out.push_back(field1(v[static_cast<std::size_t>(k)], where + "[" + std::to_string(k) + "]", var));
  return out;
}

inline void probe(const Field1& f, const std::string& where) {
  for (int k = 0; k <= 100; ++k) {
    const double z = k / 100.0;
    double v = 0.0;
    try {
      v = f(z);
    } catch (const ExpressionDomainError& e) {
      throw ExpressionDomainError(where + " at " + std::to_string(z) + ": " + e.what());
    }
    if (!std::isfinite(v)) throw ExpressionDomainError(where + " is not finite at " + std::to_string(z));
  }
}

inline void probe(const Field2& f, const std::string& where) {
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; b <= a; ++b) {
      const double z = a / 100.0, zeta = b / 100.0;
      double v = 0.0;
      try {
        v = f(z, zeta);
      } catch (const ExpressionDomainError& e) {
        throw ExpressionDomainError(where + " at (" + std::to_string(z) + ", " + std::to_string(zeta) + "): " + e.what());
      }
      if (!std::isfinite(v)) throw ExpressionDomainError(where + " is not finite at (" + std::to_string(z) + ", " + std::to_string(zeta) + ")");
    }
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Build a configuration from JSON text. Every expression is parsed and
/// evaluated on 101 probe points in [0, 1].
inline ConfigDocument parse_config_text(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  ConfigDocument cfg;
  const auto& p = detail::member(doc, "plant", "config");
  auto& plant = cfg.plant;
  const auto& nv = detail::member(p, "n", "plant");
  if (!nv.is_number_integer() || nv.get<int>() < 1) throw ParseError("plant.n: expected a positive integer");
  const int n = nv.get<int>();
  plant.n = n;
  plant.lambda = detail::field_vector(detail::member(p, "lambda", "plant"), n, "plant.lambda");
  if (p.contains("lambda_d1")) plant.lambda_d1 = detail::field_vector(p.at("lambda_d1"), n, "plant.lambda_d1");
  if (p.contains("lambda_d2")) plant.lambda_d2 = detail::field_vector(p.at("lambda_d2"), n, "plant.lambda_d2");
  if (p.contains("phi_conv")) plant.phi_conv = detail::field_vector(p.at("phi_conv"), n, "plant.phi_conv");
  plant.A = detail::field_matrix<Field1Matrix>(p, "A", n, "plant", [](const json& v, const std::string& w) { return detail::field1(v, w); });
  plant.A0 = detail::field_matrix<Field1Matrix>(p, "A0", n, "plant", [](const json& v, const std::string& w) { return detail::field1(v, w); });
  plant.F = detail::field_matrix<Field2Matrix>(p, "F", n, "plant", detail::field2);
  if (p.contains("B0_1") || p.contains("B0_0")) {
    plant.B0_1 = detail::number_matrix(detail::member(p, "B0_1", "plant"), n, "plant.B0_1");
    plant.B0_0 = detail::number_matrix(detail::member(p, "B0_0", "plant"), n, "plant.B0_0");
  } else {
    const auto& mv = detail::member(p, "m", "plant");
    if (!mv.is_number_integer()) throw ParseError("plant.m: expected an integer");
    plant.m = mv.get<int>();
    if (plant.m < 0 || plant.m > n) throw DimensionMismatch("plant.m must lie in [0, n]");
    plant.Q0 = p.contains("Q0") ? detail::numbers(p.at("Q0"), n - plant.m, "plant.Q0") : std::vector<double>(static_cast<std::size_t>(n - plant.m), 0.0);
  }
  const auto b11 = detail::numbers(detail::member(p, "B1_1", "plant"), n, "plant.B1_1");
  plant.B1_1 = Eigen::Map<const Eigen::VectorXd>(b11.data(), n);
  plant.B1_0 = detail::number_matrix(detail::member(p, "B1_0", "plant"), n, "plant.B1_0");

  const auto& t = detail::member(doc, "target", "config");
  auto& target = cfg.target;
  if (t.contains("mu_c")) {
    if (!t.at("mu_c").is_number()) throw ParseError("target.mu_c: expected a number");
    target.mu_c = t.at("mu_c").get<double>();
  }
  target.Bt1_1 = detail::numbers(detail::member(t, "Bt1_1", "target"), n, "target.Bt1_1");
  target.Bt1_0 = detail::numbers(detail::member(t, "Bt1_0", "target"), n, "target.Bt1_0");
  if (t.contains("g_f")) {
    const auto& g = t.at("g_f");
    if (!g.is_object()) throw ParseError("target.g_f: expected an object keyed by \"i,j\"");
    for (const auto& [key, value] : g.items()) {
      int i = -1, j = -1;
      char comma = 0;
      std::istringstream is(key);
      if (!(is >> i >> comma >> j) || comma != ',' || !is.eof()) throw ParseError("target.g_f: key '" + key + "' is not of the form \"i,j\"");
      if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw DimensionMismatch("target.g_f: pair '" + key + "' out of range");
      target.g_f[{i, j}] = detail::field1(value, "target.g_f." + key, "eta");
    }
  }

  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    if (s.contains("grid_n")) cfg.solver.grid_n = s.at("grid_n").get<int>();
    if (s.contains("tol")) cfg.solver.tol = s.at("tol").get<double>();
    if (s.contains("max_iter")) cfg.solver.max_iter = s.at("max_iter").get<int>();
  }
  if (doc.contains("sim")) {
    const auto& s = doc.at("sim");
    if (s.contains("n_z")) cfg.sim.n_z = s.at("n_z").get<int>();
    if (s.contains("t_end")) cfg.sim.t_end = s.at("t_end").get<double>();
    if (s.contains("dt")) cfg.sim.dt = s.at("dt").get<double>();
    if (s.contains("snapshot_stride")) cfg.sim.snapshot_stride = s.at("snapshot_stride").get<int>();
    if (s.contains("x0")) cfg.sim.x0 = detail::field_vector(s.at("x0"), n, "sim.x0");
  }
  if (cfg.sim.x0.empty()) cfg.sim.x0.assign(static_cast<std::size_t>(n), Field1{});

  for (int i = 0; i < n; ++i) {
    const std::string k = "[" + std::to_string(i) + "]";
    detail::probe(plant.lambda[i], "plant.lambda" + k);
    if (!plant.lambda_d1.empty()) detail::probe(plant.lambda_d1[i], "plant.lambda_d1" + k);
    if (!plant.lambda_d2.empty()) detail::probe(plant.lambda_d2[i], "plant.lambda_d2" + k);
    if (!plant.phi_conv.empty()) detail::probe(plant.phi_conv[i], "plant.phi_conv" + k);
    detail::probe(cfg.sim.x0[i], "sim.x0" + k);
    for (int j = 0; j < n; ++j) {
      const std::string kk = k + "[" + std::to_string(j) + "]";
      detail::probe(plant.A(i, j), "plant.A" + kk);
      detail::probe(plant.A0(i, j), "plant.A0" + kk);
      detail::probe(plant.F(i, j), "plant.F" + kk);
    }
  }
  for (const auto& [key, f] : target.g_f) detail::probe(f, "target.g_f");
  return cfg;
}

inline ConfigDocument parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open configuration file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace pidebs

#endif  // PIDEBS_CONFIG_HPP
