#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "linproj/linproj.hpp"

namespace linproj::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver section of a problem file. Missing keys keep library defaults.
struct SolverSection {
  double theta = 1.0;
  double epsilon = 1e-6;
  std::optional<double> l0;     // nullopt: "theta"
  std::optional<double> delta;  // nullopt: "auto"
  std::size_t max_iter = 100000;

  SolverConfig to_config() const {
    SolverConfig cfg;
    cfg.theta = theta;
    cfg.epsilon = epsilon;
    cfg.l0 = l0;
    cfg.delta = delta;
    cfg.max_iter = max_iter;
    return cfg;
  }
};

struct ProblemFile {
  GeneralConstraints constraints;
  std::vector<Vector> costs;
  SolverSection solver;
};

namespace detail {

inline void only_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw InputError(where + ": unknown field '" + key + "'");
}

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + ": expected a number");
  return v.get<double>();
}

inline std::size_t count(const Json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw InputError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline Vector vector(const Json& v, const std::string& where, std::optional<std::size_t> len = std::nullopt) {
  if (!v.is_array()) throw InputError(where + ": expected an array");
  Vector out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], where + "[" + std::to_string(k) + "]"));
  if (len && out.size() != *len)
    throw InputError(where + ": expected " + std::to_string(*len) + " entries, got " + std::to_string(out.size()));
  return out;
}

inline std::vector<std::size_t> indices(const Json& v, const std::string& where) {
  if (!v.is_array()) throw InputError(where + ": expected an array");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(count(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

inline LinearOperator matrix(const Json& v, std::size_t cols, const std::string& where) {
  if (v.contains("dense")) {
    only_keys(v, {"dense"}, where);
    const Json& rows = v.at("dense");
    if (!rows.is_array()) throw InputError(where + ".dense: expected an array of rows");
    Vector entries;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Vector row = vector(rows[i], where + ".dense[" + std::to_string(i) + "]", cols);
      entries.insert(entries.end(), row.begin(), row.end());
    }
    return DenseMatrix(rows.size(), cols, std::move(entries));
  }
  only_keys(v, {"csr"}, where);
  const Json& c = field(v, "csr", where);
  const std::string w = where + ".csr";
  only_keys(c, {"rows", "cols", "row_offsets", "col_indices", "values"}, w);
  const std::size_t r = count(field(c, "rows", w), w + ".rows");
  const std::size_t k = count(field(c, "cols", w), w + ".cols");
  if (k != cols) throw InputError(w + ".cols: expected " + std::to_string(cols));
  try {
    return CsrMatrix(r, k, indices(field(c, "row_offsets", w), w + ".row_offsets"),
                     indices(field(c, "col_indices", w), w + ".col_indices"), vector(field(c, "values", w), w + ".values"));
  } catch (const ContractViolation& e) {
    throw InputError(w + ": " + e.what());
  }
}

inline Json matrix_json(const LinearOperator& op) {
  if (const auto* d = op.as_dense()) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < d->rows(); ++i) {
      Json row = Json::array();
      for (std::size_t j = 0; j < d->cols(); ++j) row.push_back((*d)(i, j));
      rows.push_back(std::move(row));
    }
    return Json{{"dense", std::move(rows)}};
  }
  const CsrMatrix c = to_csr(op);
  Json body;
  body["rows"] = c.rows();
  body["cols"] = c.cols();
  body["row_offsets"] = c.row_offsets();
  body["col_indices"] = c.col_indices();
  body["values"] = c.values();
  return Json{{"csr", std::move(body)}};
}

}  // namespace detail

inline ProblemFile parse_problem(const Json& doc) {
  using namespace detail;
  only_keys(doc, {"version", "constraints", "costs", "solver"}, "problem");
  const Json& version = field(doc, "version", "problem");
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion)
    throw InputError("problem.version: unsupported version (expected " + std::to_string(kFormatVersion) + ")");

  ProblemFile pf;
  const Json& c = field(doc, "constraints", "problem");
  only_keys(c, {"n", "a1", "b1", "a2", "b2", "a3", "b3", "lower", "upper"}, "constraints");
  const std::size_t n = count(field(c, "n", "constraints"), "constraints.n");
  GeneralConstraints& gc = pf.constraints;
  gc.lower = vector(field(c, "lower", "constraints"), "constraints.lower", n);
  gc.upper = vector(field(c, "upper", "constraints"), "constraints.upper", n);
  auto block = [&](const char* a_key, const char* b_key, LinearOperator& a, Vector& b) {
    const std::string aw = std::string("constraints.") + a_key, bw = std::string("constraints.") + b_key;
    if (c.contains(a_key) != c.contains(b_key)) throw InputError(aw + "/" + b_key + ": must be given together");
    if (!c.contains(a_key)) {
      a = DenseMatrix::zeros(0, n);
      return;
    }
    a = matrix(c.at(a_key), n, aw);
    b = vector(c.at(b_key), bw, a.rows());
  };
  block("a1", "b1", gc.a1, gc.b1);
  block("a2", "b2", gc.a2, gc.b2);
  block("a3", "b3", gc.a3, gc.b3);
  try {
    gc.validate();
  } catch (const ContractViolation& e) {
    throw InputError(std::string("constraints: ") + e.what());
  }

  if (doc.contains("costs")) {
    const Json& costs = doc.at("costs");
    if (!costs.is_array()) throw InputError("costs: expected an array of cost vectors");
    for (std::size_t k = 0; k < costs.size(); ++k)
      pf.costs.push_back(vector(costs[k], "costs[" + std::to_string(k) + "]", n));
  }

  if (doc.contains("solver")) {
    const Json& s = doc.at("solver");
    only_keys(s, {"theta", "epsilon", "l0", "delta", "max_iter"}, "solver");
    if (s.contains("theta")) pf.solver.theta = number(s.at("theta"), "solver.theta");
    if (s.contains("epsilon")) pf.solver.epsilon = number(s.at("epsilon"), "solver.epsilon");
    if (s.contains("max_iter")) pf.solver.max_iter = count(s.at("max_iter"), "solver.max_iter");
    if (s.contains("l0") && s.at("l0") != "theta") pf.solver.l0 = number(s.at("l0"), "solver.l0");
    if (s.contains("delta") && s.at("delta") != "auto") pf.solver.delta = number(s.at("delta"), "solver.delta");
    try {
      pf.solver.to_config().validate();
    } catch (const ContractViolation& e) {
      throw InputError(std::string("solver: ") + e.what());
    }
  }
  return pf;
}

inline ProblemFile parse_problem_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
  return parse_problem(doc);
}

/// Canonical field order; every field is written so that parse then write is
/// byte-stable.
inline Json problem_json(const ProblemFile& pf) {
  using detail::matrix_json;
  const GeneralConstraints& gc = pf.constraints;
  Json c;
  c["n"] = gc.num_vars();
  c["a1"] = matrix_json(gc.a1);
  c["b1"] = gc.b1;
  c["a2"] = matrix_json(gc.a2);
  c["b2"] = gc.b2;
  c["a3"] = matrix_json(gc.a3);
  c["b3"] = gc.b3;
  c["lower"] = gc.lower;
  c["upper"] = gc.upper;

  Json s;
  s["theta"] = pf.solver.theta;
  s["epsilon"] = pf.solver.epsilon;
  s["l0"] = pf.solver.l0 ? Json(*pf.solver.l0) : Json("theta");
  s["delta"] = pf.solver.delta ? Json(*pf.solver.delta) : Json("auto");
  s["max_iter"] = pf.solver.max_iter;

  Json doc;
  doc["version"] = kFormatVersion;
  doc["constraints"] = std::move(c);
  doc["costs"] = pf.costs;
  doc["solver"] = std::move(s);
  return doc;
}

inline std::string problem_text(const ProblemFile& pf) { return problem_json(pf).dump(2) + "\n"; }

}  // namespace linproj::cli
