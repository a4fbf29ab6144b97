#include "efgeo/geometry_spec.hpp"

#include <fstream>
#include <sstream>

#include "efgeo/error.hpp"
#include "efgeo/expression.hpp"

namespace efgeo {

namespace {

using json = nlohmann::json;

std::vector<std::string> strings(const json &j, const std::string &where, std::size_t n) {
  if (!j.is_array() || j.size() != n)
    throw SchemaError(where + ": expected an array of " + std::to_string(n) + " expressions");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!j[i].is_string())
      throw SchemaError(where + "[" + std::to_string(i) + "]: expected an expression string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

std::vector<std::vector<std::string>> string_matrix(const json &j, const std::string &where,
                                                    std::size_t n) {
  if (!j.is_array() || j.size() != n)
    throw SchemaError(where + ": expected " + std::to_string(n) + " rows");
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(strings(j[i], where + "[" + std::to_string(i) + "]", n));
  return out;
}

std::map<std::string, double> merged(const std::map<std::string, double> &a,
                                     const std::map<std::string, double> &b) {
  auto out = a;
  for (const auto &[k, v] : b) out[k] = v;
  return out;
}

Expression compile_at(const std::string &src, int dim, const std::map<std::string, double> &p,
                      const std::string &where) {
  try {
    return Expression::compile(src, dim, p);
  } catch (const SchemaError &e) {
    throw SchemaError(where + ": " + e.what());
  }
}

RVector eval_vector(const std::vector<Expression> &e, const RVector &q) {
  RVector out(static_cast<Eigen::Index>(e.size()));
  const std::span<const double> s(q.data(), static_cast<std::size_t>(q.size()));
  for (std::size_t i = 0; i < e.size(); ++i) out[static_cast<Eigen::Index>(i)] = e[i](s);
  return out;
}

RMatrix eval_matrix(const ExpressionMatrix &e, const RVector &q) {
  const auto n = static_cast<Eigen::Index>(e.size());
  RMatrix out(n, n);
  const std::span<const double> s(q.data(), static_cast<std::size_t>(q.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = e[i][j](s);
  return out;
}

} // namespace

CoordinateChart GeometrySpec::chart(const std::map<std::string, double> &extra) const {
  if (!has_chart()) throw SchemaError("geometry: no chart defined");
  const auto p = merged(parameters, extra);
  std::vector<Expression> fwd, inv;
  ExpressionMatrix jac;
  std::vector<ExpressionMatrix> hes;
  for (int i = 0; i < dim; ++i) {
    const std::string k = "[" + std::to_string(i) + "]";
    fwd.push_back(compile_at(forward[i], dim, p, "geometry.forward" + k));
    inv.push_back(compile_at(inverse[i], dim, p, "geometry.inverse" + k));
    jac.emplace_back();
    hes.emplace_back();
    for (int j = 0; j < dim; ++j) {
      const std::string kj = k + "[" + std::to_string(j) + "]";
      jac.back().push_back(compile_at(jacobian[i][j], dim, p, "geometry.jacobian" + kj));
      hes.back().emplace_back();
      for (int l = 0; l < dim; ++l)
        hes.back().back().push_back(
            compile_at(hessian[i][j][l], dim, p, "geometry.hessian" + kj + "[" + std::to_string(l) + "]"));
    }
  }
  return CoordinateChart(
      dim, [fwd](const RVector &q) { return eval_vector(fwd, q); },
      [inv](const RVector &q) { return eval_vector(inv, q); },
      [jac](const RVector &q) { return eval_matrix(jac, q); },
      [hes](const RVector &q) {
        std::vector<RMatrix> out;
        for (const auto &h : hes) out.push_back(eval_matrix(h, q));
        return out;
      });
}

MassMetricField GeometrySpec::metric(const std::map<std::string, double> &extra) const {
  const auto p = merged(parameters, extra);
  ExpressionMatrix m;
  for (int i = 0; i < dim; ++i) {
    m.emplace_back();
    for (int j = 0; j < dim; ++j)
      m.back().push_back(compile_at(metric_inverse[i][j], dim, p,
                                    "geometry.metric_inverse[" + std::to_string(i) + "][" +
                                        std::to_string(j) + "]"));
  }
  return MassMetricField(dim, [m](const RVector &q) { return eval_matrix(m, q); }, j0);
}

nlohmann::json GeometrySpec::to_json() const {
  json j;
  j["dim"] = dim;
  if (has_chart()) {
    j["forward"] = forward;
    j["inverse"] = inverse;
    j["jacobian"] = jacobian;
    j["hessian"] = hessian;
  }
  j["metric_inverse"] = metric_inverse;
  j["j0"] = j0;
  if (!parameters.empty()) j["parameters"] = parameters;
  return j;
}

GeometrySpec GeometrySpec::from_json(const nlohmann::json &j, const std::string &where,
                                     const std::map<std::string, double> &extra) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  GeometrySpec s;
  if (!j.contains("dim") || !j["dim"].is_number_integer() || j["dim"].get<int>() < 1)
    throw SchemaError(where + ".dim: expected a positive integer");
  s.dim = j["dim"].get<int>();
  const auto d = static_cast<std::size_t>(s.dim);
  if (j.contains("forward")) {
    for (const char *k : {"inverse", "jacobian", "hessian"})
      if (!j.contains(k)) throw SchemaError(where + ": chart needs \"" + std::string(k) + "\"");
    s.forward = strings(j["forward"], where + ".forward", d);
    s.inverse = strings(j["inverse"], where + ".inverse", d);
    s.jacobian = string_matrix(j["jacobian"], where + ".jacobian", d);
    const json &h = j["hessian"];
    if (!h.is_array() || h.size() != d) throw SchemaError(where + ".hessian: expected " + std::to_string(d) + " blocks");
    for (std::size_t i = 0; i < d; ++i)
      s.hessian.push_back(string_matrix(h[i], where + ".hessian[" + std::to_string(i) + "]", d));
  }
  if (!j.contains("metric_inverse")) throw SchemaError(where + ": missing field \"metric_inverse\"");
  s.metric_inverse = string_matrix(j["metric_inverse"], where + ".metric_inverse", d);
  if (j.contains("j0")) {
    if (!j["j0"].is_number() || !(j["j0"].get<double>() > 0.0))
      throw SchemaError(where + ".j0: expected a positive number");
    s.j0 = j["j0"].get<double>();
  }
  if (j.contains("parameters")) {
    if (!j["parameters"].is_object()) throw SchemaError(where + ".parameters: expected an object");
    for (const auto &[k, v] : j["parameters"].items()) {
      if (!v.is_number()) throw SchemaError(where + ".parameters." + k + ": expected a number");
      s.parameters[k] = v.get<double>();
    }
  }
  // compile once so that malformed expressions fail at load time
  s.metric(extra);
  if (s.has_chart()) s.chart(extra);
  return s;
}

GeometrySpec read_geometry_spec(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw SchemaError(path + ": " + e.what());
  }
  return GeometrySpec::from_json(j.contains("geometry") ? j["geometry"] : j);
}

void write_geometry_spec(const GeometrySpec &spec, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path);
  out << spec.to_json().dump(2) << '\n';
}

} // namespace efgeo
