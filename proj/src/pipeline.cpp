#include "efgeo/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include <Eigen/Core>

#include "efgeo/csv.hpp"

namespace efgeo {

using nlohmann::json;

namespace {

using TolField = double Tolerances::*;

const std::vector<std::pair<std::string, TolField>> &tolerance_fields() {
  static const std::vector<std::pair<std::string, TolField>> f = {
      {"eigen_residual", &Tolerances::eigen_residual},
      {"reference_energy", &Tolerances::reference_energy},
      {"reconstruction", &Tolerances::reconstruction},
      {"chi_norm", &Tolerances::chi_norm},
      {"metric_identity", &Tolerances::metric_identity},
      {"christoffel_reconstruction", &Tolerances::christoffel_reconstruction},
      {"christoffel_metric", &Tolerances::christoffel_metric},
      {"decomposition", &Tolerances::decomposition},
      {"nuclear_residual", &Tolerances::nuclear_residual},
      {"electronic_residual", &Tolerances::electronic_residual},
      {"phi_projection", &Tolerances::phi_projection},
      {"projected_mismatch", &Tolerances::projected_mismatch},
      {"form_mismatch", &Tolerances::form_mismatch},
      {"operator_identity", &Tolerances::operator_identity},
      {"gauge_spread", &Tolerances::gauge_spread},
      {"fd", &Tolerances::fd},
      {"chart_energy", &Tolerances::chart_energy},
      {"chart_field", &Tolerances::chart_field},
      {"norm_drift", &Tolerances::norm_drift},
      {"energy_drift", &Tolerances::energy_drift},
      {"geometric_phase", &Tolerances::geometric_phase},
  };
  return f;
}

double wrap_angle(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x, two_pi);
  if (x <= -std::numbers::pi) x += two_pi;
  if (x > std::numbers::pi) x -= two_pi;
  return x;
}

RVector point(const Grid &grid, std::size_t node) {
  const auto c = grid.coordinates(node);
  return RVector::Map(c.data(), static_cast<Eigen::Index>(c.size()));
}

double field_difference(const CVector &a, const CVector &b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

double relative_or_absolute(double value, double scale) {
  return std::abs(scale) > 1e-8 ? value / std::abs(scale) : value;
}

// Lagrange interpolation; returns false when a stencil node is masked or q
// lies outside a clamped axis.
bool lagrange(const Grid &grid, const RVector &values, const RVector &q, int points, const std::vector<bool> *mask,
              double &out) {
  const int d = grid.dim();
  std::vector<std::vector<std::pair<int, double>>> taps(static_cast<std::size_t>(d));
  for (int mu = 0; mu < d; ++mu) {
    const Axis &a = grid.axis(mu);
    const double h = a.spacing();
    const int p = std::min(points, a.n);
    const double s = (q[mu] - a.lo) / h;
    int first = static_cast<int>(std::floor(s)) - p / 2 + 1;
    if (a.boundary == Boundary::Clamped) {
      if (s < -1e-9 || s > a.n - 1 + 1e-9) return false;
      first = std::clamp(first, 0, a.n - p);
    }
    for (int k = first; k < first + p; ++k) {
      double w = 1.0;
      for (int j = first; j < first + p; ++j)
        if (j != k) w *= (s - j) / static_cast<double>(k - j);
      const int idx = ((k % a.n) + a.n) % a.n;
      taps[mu].push_back({idx, w});
    }
  }
  double acc = 0.0;
  std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
  while (true) {
    std::vector<int> idx(static_cast<std::size_t>(d));
    double w = 1.0;
    for (int mu = 0; mu < d; ++mu) {
      idx[mu] = taps[mu][pos[mu]].first;
      w *= taps[mu][pos[mu]].second;
    }
    const std::size_t node = grid.flat_index(idx);
    if (mask && (*mask)[node]) return false;
    acc += w * values[static_cast<Eigen::Index>(node)];
    int mu = d - 1;
    while (mu >= 0 && ++pos[mu] == taps[mu].size()) pos[mu--] = 0;
    if (mu < 0) break;
  }
  out = acc;
  return true;
}

CoordinateChart cubic_chart() {
  // Q̄ solves Q̄³ + 2Q̄ = Q
  auto solve = [](double q) {
    const double r = std::sqrt(q * q / 4.0 + 8.0 / 27.0);
    return std::cbrt(q / 2.0 + r) + std::cbrt(q / 2.0 - r);
  };
  return CoordinateChart(
      1, [solve](const RVector &q) { return RVector::Constant(1, solve(q[0])); },
      [](const RVector &qb) { return RVector::Constant(1, qb[0] * qb[0] * qb[0] + 2.0 * qb[0]); },
      [solve](const RVector &q) {
        const double b = solve(q[0]);
        return RMatrix::Constant(1, 1, 1.0 / (3.0 * b * b + 2.0));
      },
      [solve](const RVector &q) {
        const double b = solve(q[0]);
        const double j = 3.0 * b * b + 2.0;
        return std::vector<RMatrix>{RMatrix::Constant(1, 1, -6.0 * b / (j * j * j))};
      });
}

int get_int(const json &j, const std::string &key) {
  if (!j.is_number_integer()) throw SchemaError("config." + key + ": expected an integer");
  return j.get<int>();
}

double get_double(const json &j, const std::string &key) {
  if (!j.is_number()) throw SchemaError("config." + key + ": expected a number");
  return j.get<double>();
}

std::string get_string(const json &j, const std::string &key) {
  if (!j.is_string()) throw SchemaError("config." + key + ": expected a string");
  return j.get<std::string>();
}

} // namespace

Tolerances Tolerances::profile(const std::string &name) {
  Tolerances t;
  double scale = 1.0;
  if (name == "loose") scale = 100.0;
  else if (name == "absurd") scale = 1e-30;
  else if (name != "default") throw SchemaError("unknown tolerance profile \"" + name + "\"");
  for (const auto &[k, f] : tolerance_fields()) t.*f *= scale;
  return t;
}

json Tolerances::to_json() const {
  json j = json::object();
  for (const auto &[k, f] : tolerance_fields()) j[k] = this->*f;
  return j;
}

void Tolerances::update(const json &j) {
  if (!j.is_object()) throw SchemaError("config.tolerances: expected an object");
  for (const auto &[k, v] : j.items()) {
    bool found = false;
    for (const auto &[name, f] : tolerance_fields())
      if (name == k) {
        if (!v.is_number() || !(v.get<double>() >= 0.0))
          throw SchemaError("config.tolerances." + k + ": expected a non-negative number");
        this->*f = v.get<double>();
        found = true;
      }
    if (!found) throw SchemaError("config.tolerances." + k + ": unknown tolerance");
  }
}

const std::vector<std::string> &stage_names() {
  static const std::vector<std::string> s = {"solve",    "factorize",   "geometry",   "residuals",
                                             "dynamics", "gauge-sweep", "chart-sweep"};
  return s;
}

Tolerances RunConfig::tolerances() const {
  Tolerances t = Tolerances::profile(tolerance_profile);
  t.update(tolerance_overrides);
  return t;
}

json RunConfig::to_json() const {
  json j;
  j["model"] = model;
  j["stages"] = stages;
  j["nodes"] = nodes ? json(*nodes) : json(nullptr);
  j["fd_order"] = fd_order;
  j["eps_node"] = eps_node;
  j["cond_cap"] = cond_cap;
  j["rank_tolerance"] = rank_tolerance;
  j["states"] = states;
  j["state"] = state;
  j["dt"] = dt;
  j["steps"] = steps;
  j["gauge_samples"] = gauge_samples;
  j["convention"] = convention;
  j["chart"] = chart;
  j["chart_target"] = chart_target;
  j["out"] = out;
  j["seed"] = seed;
  j["tolerance_profile"] = tolerance_profile;
  j["tolerances"] = tolerance_overrides;
  j["threads"] = threads;
  return j;
}

RunConfig RunConfig::from_json(const json &j) {
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  RunConfig c;
  for (const auto &[k, v] : j.items()) {
    if (k == "model") {
      if (!v.is_object() && !v.is_string()) throw SchemaError("config.model: expected an object or a builtin name");
      c.model = v;
    } else if (k == "stages") {
      if (!v.is_array()) throw SchemaError("config.stages: expected an array");
      c.stages.clear();
      for (const auto &s : v) {
        const std::string name = get_string(s, "stages[]");
        if (std::find(stage_names().begin(), stage_names().end(), name) == stage_names().end())
          throw SchemaError("config.stages: unknown stage \"" + name + "\"");
        c.stages.push_back(name);
      }
    } else if (k == "nodes") {
      if (v.is_null()) c.nodes.reset();
      else c.nodes = get_int(v, k);
    } else if (k == "fd_order") c.fd_order = get_int(v, k);
    else if (k == "eps_node") c.eps_node = get_double(v, k);
    else if (k == "cond_cap") c.cond_cap = get_double(v, k);
    else if (k == "rank_tolerance") c.rank_tolerance = get_double(v, k);
    else if (k == "states") c.states = get_int(v, k);
    else if (k == "state") c.state = get_int(v, k);
    else if (k == "dt") c.dt = get_double(v, k);
    else if (k == "steps") c.steps = get_int(v, k);
    else if (k == "gauge_samples") c.gauge_samples = get_int(v, k);
    else if (k == "convention") {
      c.convention = get_string(v, k);
      convention_from_string(c.convention);
    } else if (k == "chart") c.chart = v;
    else if (k == "chart_target") c.chart_target = v;
    else if (k == "out") c.out = get_string(v, k);
    else if (k == "seed") {
      if (!v.is_number_unsigned()) throw SchemaError("config.seed: expected a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (k == "tolerance_profile") c.tolerance_profile = get_string(v, k);
    else if (k == "tolerances") c.tolerance_overrides = v;
    else if (k == "threads") c.threads = get_int(v, k);
    else throw SchemaError("config." + k + ": unknown key");
  }
  if (c.states < 1) throw SchemaError("config.states: must be positive");
  if (c.state < 0 || c.state >= c.states) throw SchemaError("config.state: must lie in [0, states)");
  if (c.steps < 1) throw SchemaError("config.steps: must be positive");
  if (!(c.dt > 0.0)) throw SchemaError("config.dt: must be positive");
  if (c.gauge_samples < 0) throw SchemaError("config.gauge_samples: must be non-negative");
  c.tolerances();
  return c;
}

Model resolve_model(const json &ref, std::optional<int> nodes) {
  json spec;
  if (ref.is_string()) {
    spec = builtin_spec(ref.get<std::string>());
  } else if (ref.is_object() && ref.contains("builtin")) {
    spec = builtin_spec(ref["builtin"].get<std::string>());
  } else if (ref.is_object() && ref.contains("path")) {
    const std::string path = ref["path"].get<std::string>();
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    try {
      spec = json::parse(in);
    } catch (const json::parse_error &e) {
      throw SchemaError(path + ": " + e.what());
    }
  } else {
    spec = ref;
  }
  if (nodes) {
    if (*nodes < 2) throw SchemaError("nodes: need at least 2 per axis");
    if (spec.contains("grid") && spec["grid"].contains("axes") && spec["grid"]["axes"].is_array())
      for (auto &a : spec["grid"]["axes"]) a["n"] = *nodes;
  }
  return model_from_json(spec);
}

CoordinateChart resolve_chart(const json &ref, int dim) {
  if (ref.is_null() || (ref.is_string() && ref.get<std::string>() == "identity"))
    return CoordinateChart::identity(dim);
  if (ref.is_string()) {
    const std::string name = ref.get<std::string>();
    if (name == "cubic") {
      if (dim != 1) throw DomainError("the cubic chart is one-dimensional");
      return cubic_chart();
    }
    throw SchemaError("unknown chart \"" + name + "\"");
  }
  json spec = ref.contains("geometry") ? ref["geometry"] : ref;
  if (!spec.is_object()) throw SchemaError("chart: expected an object");
  if (!spec.contains("metric_inverse")) {
    json id = json::array();
    for (int i = 0; i < dim; ++i) {
      json row = json::array();
      for (int k = 0; k < dim; ++k) row.push_back(i == k ? "1" : "0");
      id.push_back(row);
    }
    spec["metric_inverse"] = id;
  }
  const GeometrySpec g = GeometrySpec::from_json(spec, "chart");
  if (!g.has_chart()) throw SchemaError("chart: missing forward/inverse/jacobian/hessian");
  if (g.dim != dim) throw SchemaError("chart.dim: does not match the model");
  return g.chart();
}

ModelContext::ModelContext(Model m, int fd_order)
    : model(std::move(m)), fd(model.grid, fd_order), metric(MetricOnGrid::sample(model.metric, model.grid)),
      h_bo(model.h_bo.sample(model.grid)), kinetic(build_kinetic_operator(model.grid, model.metric, fd_order)),
      hamiltonian(build_full_hamiltonian(kinetic, model.h_bo)) {}

StateAnalysis::StateAnalysis(const ModelContext &ctx, Factorization f, const TimeMode &mode,
                             const EfGeometryOptions &opt)
    : fact(std::move(f)), calc(fact, ctx.fd), geo(compute_ef_geometry(fact, calc, ctx.metric, ctx.h_bo, opt)),
      residuals(compute_residuals(fact, calc, geo, ctx.metric, ctx.h_bo, mode)) {}

double reconstruction_error(const Factorization &fact, const FullState &psi) {
  const FullState r = fact.reconstruct();
  double err = 0.0;
  for (Eigen::Index i = 0; i < psi.psi.rows(); ++i)
    if (!fact.mask[static_cast<std::size_t>(i)])
      err = std::max(err, (r.psi.row(i) - psi.psi.row(i)).cwiseAbs().maxCoeff());
  return err;
}

double eigen_residual(const FullHamiltonian &h, const FullState &s) {
  if (!s.energy) throw DomainError("eigen_residual: state carries no energy");
  const CVector r = h.apply(s) - *s.energy * s.flat();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < r.size(); ++k) acc += h.weight[k / s.levels] * std::norm(r[k]);
  return std::sqrt(acc);
}

json IdentityReport::to_json() const {
  return {{"metric_identity", metric_identity},
          {"contraction", contraction},
          {"christoffel_reconstruction", christoffel_reconstruction},
          {"christoffel_metric", christoffel_metric},
          {"decomposition", decomposition},
          {"upsilon_asymmetry", upsilon_asymmetry},
          {"flagged_fraction", flagged_fraction}};
}

IdentityReport check_identities(const ModelContext &ctx, const StateAnalysis &a) {
  IdentityReport r;
  const EfGeometry &geo = a.geo;
  const int d = ctx.model.grid.dim();
  const std::size_t nn = ctx.model.grid.size();
  for (std::size_t node = 0; node < nn; ++node) {
    const auto i = static_cast<Eigen::Index>(node);
    double contraction = 0.0;
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        const double re_h = geo.h[{mu, nu}][i].real();
        r.metric_identity = std::max(r.metric_identity, std::abs(geo.g[{mu, nu}][i] - re_h));
        contraction += 0.5 * ctx.metric.inverse_mass[node](mu, nu) * re_h;
      }
    r.contraction = std::max(r.contraction, std::abs(geo.eps_geo.values[i] - contraction));
  }
  r.christoffel_reconstruction = geo.reconstruction_error;
  r.upsilon_asymmetry = geo.upsilon_asymmetry;

  const TensorField gamma = christoffel_from_metric(geo.g, ctx.fd);
  double diff = 0.0;
  std::size_t flagged = 0;
  for (std::size_t node = 0; node < nn; ++node) {
    if (geo.flagged[node]) {
      ++flagged;
      continue;
    }
    const auto i = static_cast<Eigen::Index>(node);
    double worst = 0.0;
    for (std::size_t c = 0; c < gamma.components(); ++c)
      worst = std::max(worst, std::abs(geo.gamma.component(c)[i] - gamma.component(c)[i]));
    diff += a.fact.weight[i] * std::norm(a.fact.chi.values[i]) * worst * worst;
    r.decomposition = std::max(r.decomposition, geo.decomposition.residual[i]);
  }
  r.christoffel_metric = std::sqrt(diff);
  r.flagged_fraction = nn ? static_cast<double>(flagged) / static_cast<double>(nn) : 0.0;
  return r;
}

double operator_identity_defect(const KineticOperator &kinetic, const MetricOnGrid &metric,
                                const FiniteDifference &fd, const CVector &chi) {
  const Grid &grid = kinetic.grid;
  const int d = grid.dim();
  const CVector t = kinetic.apply(chi);
  std::vector<CVector> d1(static_cast<std::size_t>(d));
  std::vector<CVector> d2(static_cast<std::size_t>(d * d));
  for (int mu = 0; mu < d; ++mu) d1[mu] = fd.apply(chi, mu, 1, EdgeRule::Dirichlet);
  for (int mu = 0; mu < d; ++mu)
    for (int nu = 0; nu < d; ++nu) d2[mu * d + nu] = fd.second_derivative(chi, mu, nu, EdgeRule::Dirichlet);
  double err = 0.0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto i = static_cast<Eigen::Index>(node);
    const RMatrix &m = metric.inverse_mass[node];
    const Rank3 &pi = metric.pi[node];
    cplx v = 0.0;
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        v -= 0.5 * m(mu, nu) * d2[mu * d + nu][i];
        for (int l = 0; l < d; ++l) v += 0.5 * m(mu, nu) * pi(l, mu, nu) * d1[l][i];
      }
    err = std::max(err, std::abs(t[i] - v));
  }
  return err;
}

CVector smooth_test_function(const Grid &grid) {
  CVector f(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto q = grid.coordinates(node);
    double e = 0.0;
    for (int mu = 0; mu < grid.dim(); ++mu) {
      const Axis &a = grid.axis(mu);
      const double len = a.hi - a.lo;
      if (a.boundary == Boundary::Periodic) {
        e += std::cos(2.0 * std::numbers::pi * (q[mu] - a.lo) / len) - 1.0;
      } else {
        const double s = (q[mu] - 0.5 * (a.lo + a.hi)) / (0.1 * len);
        e -= s * s;
      }
    }
    f[static_cast<Eigen::Index>(node)] = std::exp(e);
  }
  return f;
}

ElectronicField adiabatic_state(const std::vector<CMatrix> &h_bo, const Grid &grid) {
  if (h_bo.size() != grid.size()) throw ShapeMismatchError("adiabatic_state: one matrix per node expected");
  const int levels = static_cast<int>(h_bo.front().rows());
  ElectronicField phi(grid, levels, true);
  for (std::size_t node = 0; node < grid.size(); ++node) phi.set(node, hermitian_eigensolve(h_bo[node], 1)[0].vector);
  return phi;
}

double loop_phase(const ElectronicField &phi, const FiniteDifference &fd, int axis) {
  const VectorPotential vp = compute_vector_potential(phi, fd);
  return geometric_phase(vp.a, axis_loop(phi.grid, axis, 0));
}

GaugeFunction random_gauge(const Grid &grid, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  const int d = grid.dim();
  GaugeFunction g{ScalarField::zeros(grid, true), CovectorField(grid, 1, true)};
  for (int mu = 0; mu < d; ++mu) {
    double c[5];
    for (double &x : c) x = coeff(rng);
    const Axis &a = grid.axis(mu);
    const double len = a.hi - a.lo;
    for (std::size_t node = 0; node < grid.size(); ++node) {
      const double q = grid.coordinates(node)[mu];
      double v = 0.0, dv = 0.0;
      if (a.boundary == Boundary::Periodic) {
        const double k = 2.0 * std::numbers::pi / len;
        const double th = k * (q - a.lo);
        v = c[0] * std::cos(th) + c[1] * std::sin(th) + c[2] * std::cos(2 * th) + c[3] * std::sin(2 * th) +
            c[4] * std::cos(3 * th);
        dv = k * (-c[0] * std::sin(th) + c[1] * std::cos(th) - 2 * c[2] * std::sin(2 * th) +
                  2 * c[3] * std::cos(2 * th) - 3 * c[4] * std::sin(3 * th));
      } else {
        const double t = 2.0 * (q - a.lo) / len - 1.0;
        // T_k and U_{k-1} by recurrence
        double tp = 1.0, tc = t, up = 0.0, uc = 1.0;
        for (int k = 1; k <= 5; ++k) {
          v += c[k - 1] * tc;
          dv += c[k - 1] * k * uc * 2.0 / len;
          const double tn = 2.0 * t * tc - tp;
          const double un = 2.0 * t * uc - up;
          tp = tc;
          tc = tn;
          up = uc;
          uc = un;
        }
      }
      g.lambda.values[static_cast<Eigen::Index>(node)] += v;
      g.gradient[{mu}][static_cast<Eigen::Index>(node)] += dv;
    }
  }
  return g;
}

json GaugeSweepReport::to_json() const {
  json j;
  j["samples"] = samples;
  j["spread"] = spread;
  j["a_shift_error"] = a_shift_error;
  return j;
}

GaugeSweepReport gauge_sweep(const ModelContext &ctx, const StateAnalysis &base, const TimeMode &mode,
                             const EfGeometryOptions &opt, int count, std::uint64_t seed) {
  GaugeSweepReport rep;
  rep.samples = count;
  if (count <= 0) return rep;
  std::mt19937_64 rng(seed);
  const Grid &grid = ctx.model.grid;
  std::vector<int> periodic;
  for (int mu = 0; mu < grid.dim(); ++mu)
    if (grid.axis(mu).boundary == Boundary::Periodic) periodic.push_back(mu);
  const ElectronicField adiabatic = adiabatic_state(ctx.h_bo, grid);
  std::vector<double> ef_phase, ad_phase;
  for (int mu : periodic) {
    ef_phase.push_back(loop_phase(base.fact.phi, ctx.fd, mu));
    ad_phase.push_back(loop_phase(adiabatic, ctx.fd, mu));
  }
  auto bump = [&](const std::string &k, double v) { rep.spread[k] = std::max(rep.spread[k], v); };
  for (int s = 0; s < count; ++s) {
    const GaugeFunction g = random_gauge(grid, rng);
    const StateAnalysis a(ctx, gauge_transform(base.fact, g.lambda), mode, opt);
    bump("eps_bo", field_difference(a.geo.eps_bo.values, base.geo.eps_bo.values));
    bump("eps_geo", field_difference(a.geo.eps_geo.values, base.geo.eps_geo.values));
    bump("g", TensorField::max_abs_difference(a.geo.g, base.geo.g));
    bump("h", TensorField::max_abs_difference(a.geo.h, base.geo.h));
    bump("upsilon", TensorField::max_abs_difference(a.geo.upsilon_first, base.geo.upsilon_first));
    bump("nuclear_norm", std::abs(a.residuals.nuclear_norm - base.residuals.nuclear_norm));
    bump("electronic_norm", std::abs(a.residuals.electronic_norm - base.residuals.electronic_norm));
    bump("phi_projection", std::abs(a.residuals.phi_projection - base.residuals.phi_projection));
    bump("tangent_norm", std::abs(a.residuals.projected.tangent_norm - base.residuals.projected.tangent_norm));
    bump("normal_norm", std::abs(a.residuals.projected.normal_norm - base.residuals.projected.normal_norm));
    for (std::size_t p = 0; p < periodic.size(); ++p) {
      bump("loop_phase", std::abs(wrap_angle(loop_phase(a.fact.phi, ctx.fd, periodic[p]) - ef_phase[p])));
      ElectronicField ad = adiabatic;
      for (Eigen::Index i = 0; i < ad.values.rows(); ++i)
        ad.values.row(i) *= std::polar(1.0, g.lambda.values[i].real());
      bump("adiabatic_loop_phase", std::abs(wrap_angle(loop_phase(ad, ctx.fd, periodic[p]) - ad_phase[p])));
    }
    for (int mu = 0; mu < grid.dim(); ++mu)
      rep.a_shift_error = std::max(
          rep.a_shift_error, field_difference(a.calc.a()[{mu}] - base.calc.a()[{mu}], g.gradient[{mu}]));
  }
  return rep;
}

double interpolate(const Grid &grid, const RVector &values, const RVector &q, int points) {
  double out = 0.0;
  if (!lagrange(grid, values, q, points, nullptr, out)) throw DomainError("interpolate: point outside the grid");
  return out;
}

json ChartSweepReport::to_json() const {
  return {{"energies", energies},
          {"barred_energies", barred_energies},
          {"ground_delta", ground_delta},
          {"max_energy_delta", max_energy_delta},
          {"eps_bo_delta", eps_bo_delta},
          {"eps_geo_delta", eps_geo_delta},
          {"pi_residual", pi_residual},
          {"compared_nodes", compared_nodes}};
}

ChartSweepReport chart_sweep(const ModelContext &base, const CoordinateChart &chart, const Model *target,
                             int states, int state, const FactorizeOptions &fopt) {
  if (chart.dim() != base.model.grid.dim()) throw ShapeMismatchError("chart dimension differs from the model");
  const Model barred_model =
      target ? *target : transform_model(base.model, chart, mapped_grid(base.model.grid, chart));
  const ModelContext bar(barred_model, base.fd.order());

  ChartSweepReport rep;
  const auto s0 = solve_eigenstates(base.hamiltonian, states);
  const auto s1 = solve_eigenstates(bar.hamiltonian, states);
  for (std::size_t k = 0; k < s0.size() && k < s1.size(); ++k) {
    rep.energies.push_back(*s0[k].energy);
    rep.barred_energies.push_back(*s1[k].energy);
    rep.max_energy_delta =
        std::max(rep.max_energy_delta, relative_or_absolute(std::abs(*s1[k].energy - *s0[k].energy), *s0[k].energy));
  }
  const auto k = static_cast<std::size_t>(state);
  if (k >= s0.size() || k >= s1.size()) throw DomainError("chart_sweep: state index beyond the solved states");
  rep.ground_delta = relative_or_absolute(std::abs(*s1[k].energy - *s0[k].energy), *s0[k].energy);

  const StateAnalysis a0(base, factorize(s0[k], base.hamiltonian.weight, fopt), Stationary{*s0[k].energy});
  const StateAnalysis a1(bar, factorize(s1[k], bar.hamiltonian.weight, fopt), Stationary{*s1[k].energy});
  const RVector bo = a0.geo.eps_bo.values.real();
  const RVector geo = a0.geo.eps_geo.values.real();
  const int points = base.fd.order() + 2;
  for (std::size_t node = 0; node < bar.model.grid.size(); ++node) {
    if (a1.fact.mask[node]) continue;
    const RVector q = chart.inverse(point(bar.model.grid, node));
    double vb = 0.0, vg = 0.0;
    if (!lagrange(base.model.grid, bo, q, points, &a0.fact.mask, vb)) continue;
    if (!lagrange(base.model.grid, geo, q, points, &a0.fact.mask, vg)) continue;
    const auto i = static_cast<Eigen::Index>(node);
    rep.eps_bo_delta = std::max(rep.eps_bo_delta, std::abs(a1.geo.eps_bo.values[i].real() - vb));
    rep.eps_geo_delta = std::max(rep.eps_geo_delta, std::abs(a1.geo.eps_geo.values[i].real() - vg));
    ++rep.compared_nodes;
  }

  const PiSymbolField pi = pi_field(base.model.metric);
  for (std::size_t node = 0; node < base.model.grid.size(); ++node) {
    const RVector q = point(base.model.grid, node);
    const Rank3 t = transform_pi(chart, pi, q);
    const Rank3 r = compute_pi(bar.model.metric, chart.forward(q));
    rep.pi_residual = std::max(rep.pi_residual, Rank3::max_abs_difference(t, r));
  }
  return rep;
}

json DynamicsReport::to_json() const {
  return {{"steps", steps},         {"dt", dt},           {"norm_drift", norm_drift},
          {"energy_drift", energy_drift}, {"a0_error", a0_error}, {"a0_bound", a0_bound},
          {"a0_order", a0_order}};
}

namespace {

double a0_error(const ModelContext &ctx, const FullState &s, double dt, FactorizeOptions fopt) {
  fopt.convention = Convention::ChiRealPositive;
  const Trajectory tr = propagate(ctx.hamiltonian, s, dt, 2);
  std::vector<Factorization> f;
  for (const FullState &st : tr.states) f.push_back(factorize(st, ctx.hamiltonian.weight, fopt));
  const ScalarField a0 = compute_scalar_potential(f[0].phi, f[1].phi, f[2].phi, dt);
  double err = 0.0;
  for (Eigen::Index i = 0; i < a0.values.size(); ++i)
    if (!f[1].mask[static_cast<std::size_t>(i)])
      err += f[1].weight[i] * std::norm(f[1].chi.values[i]) * std::norm(a0.values[i].real() + *s.energy);
  return std::sqrt(err);
}

} // namespace

FullState select_state(const std::vector<FullState> &states, std::size_t index, const RVector &weight,
                       double degeneracy) {
  const FullState &s = states.at(index);
  auto close = [&](std::size_t j) {
    return j < states.size() &&
           std::abs(*states[j].energy - *s.energy) <= degeneracy * std::max(1.0, std::abs(*s.energy));
  };
  std::size_t other = index;
  if (index > 0 && close(index - 1)) other = index - 1;
  else if (close(index + 1)) other = index + 1;
  if (other == index) return s;
  const CMatrix &p = s.psi, &q = states[other].psi;
  const RVector a = p.rowwise().squaredNorm(), d = q.rowwise().squaredNorm();
  const CVector b = (p.conjugate().cwiseProduct(q)).rowwise().sum();
  double best = -1.0, best_t = 0.0, best_f = 0.0;
  const int nt = 65, nf = 128;
  for (int i = 0; i < nt; ++i) {
    const double t = std::numbers::pi * i / (nt - 1);
    const double c0 = std::cos(0.5 * t), c1 = std::sin(0.5 * t);
    for (int k = 0; k < nf; ++k) {
      const double f = 2.0 * std::numbers::pi * k / nf;
      const cplx e = std::polar(1.0, f);
      const RVector rho = c0 * c0 * a + c1 * c1 * d + 2.0 * c0 * c1 * (b * e).real();
      const double low = rho.minCoeff();
      if (low > best) {
        best = low;
        best_t = t;
        best_f = f;
      }
    }
  }
  FullState out = s;
  out.psi = std::cos(0.5 * best_t) * p + std::sin(0.5 * best_t) * std::polar(1.0, best_f) * q;
  out.psi /= std::sqrt(out.norm_squared(weight));
  return out;
}

DynamicsReport run_dynamics(const ModelContext &ctx, const FullState &first, const FullState &second, double dt,
                            int steps, const FactorizeOptions &fopt) {
  DynamicsReport rep;
  rep.steps = steps;
  rep.dt = dt;
  const FullHamiltonian &h = ctx.hamiltonian;
  FullState psi = first;
  psi.energy.reset();
  psi.psi = first.psi + second.psi;
  psi.psi /= std::sqrt(psi.norm_squared(h.weight));
  const Trajectory tr = propagate(h, psi, dt, steps);
  const double e0 = h.expectation(tr.states.front());
  double prev = tr.states.front().norm_squared(h.weight);
  for (const FullState &s : tr.states) {
    const double n = s.norm_squared(h.weight);
    rep.norm_drift = std::max(rep.norm_drift, std::abs(n - prev));
    prev = n;
    rep.energy_drift = std::max(rep.energy_drift, relative_or_absolute(std::abs(h.expectation(s) - e0), e0));
  }
  const double e = std::abs(*first.energy);
  rep.a0_error = a0_error(ctx, first, dt, fopt);
  rep.a0_bound = 0.5 * e * e * e * dt * dt;
  const double half = a0_error(ctx, first, 0.5 * dt, fopt);
  rep.a0_order = half > 0.0 && rep.a0_error > 0.0 ? std::log2(rep.a0_error / half) : 0.0;
  return rep;
}

bool RunResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion &a) { return a.pass; });
}

namespace {

json versions() {
  return {{"efgeo", "0.1.0"},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

std::set<std::string> closure(const std::vector<std::string> &stages) {
  std::set<std::string> s(stages.begin(), stages.end());
  if (s.count("gauge-sweep")) s.insert("residuals");
  if (s.count("residuals")) s.insert("geometry");
  if (s.count("geometry")) s.insert("factorize");
  if (s.count("factorize") || s.count("dynamics")) s.insert("solve");
  return s;
}

template <class F> auto staged(const std::string &stage, F &&f) {
  try {
    return f();
  } catch (const StageError &) {
    throw;
  } catch (const std::exception &e) {
    throw StageError(stage, e.what());
  }
}

} // namespace

RunResult run(const RunConfig &config) {
  namespace fs = std::filesystem;
  const Tolerances tol = config.tolerances();
  const std::set<std::string> stages = closure(config.stages);
  const fs::path out(config.out);
  fs::create_directories(out);
  auto file = [&](const std::string &name) { return (out / name).string(); };

  RunResult res;
  json &m = res.manifest;
  m["config"] = config.to_json();
  m["versions"] = versions();
  std::vector<std::string> ran;
  for (const auto &s : stage_names())
    if (stages.count(s)) ran.push_back(s);
  m["stages_run"] = ran;
  m["tolerances"] = tol.to_json();
  auto check = [&](const std::string &name, double value, double tolerance, bool at_least = false) {
    Assertion a{name, value, tolerance, at_least, at_least ? value >= tolerance : value <= tolerance};
    if (!std::isfinite(value)) a.pass = false;
    res.assertions.push_back(a);
  };

  const Model model = staged("model", [&] { return resolve_model(config.model, config.nodes); });
  const ModelContext ctx = staged("model", [&] { return ModelContext(model, config.fd_order); });
  m["model"] = {{"name", model.name}, {"levels", model.levels}, {"grid", model.grid.to_json()}};
  FactorizeOptions fopt;
  fopt.convention = convention_from_string(config.convention);
  fopt.eps_node = config.eps_node;
  if (fopt.convention == Convention::ReferenceOverlap) {
    fopt.reference = CVector::Zero(model.levels);
    fopt.reference[0] = 1.0;
  }
  EfGeometryOptions gopt;
  gopt.cond_cap = config.cond_cap;
  gopt.rank_tolerance = config.rank_tolerance;

  std::vector<FullState> states;
  if (stages.count("solve")) {
    states = staged("solve", [&] {
      const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(config.states),
                                                           model.grid.size() * static_cast<std::size_t>(model.levels)));
      auto s = solve_eigenstates(ctx.hamiltonian, k);
      if (static_cast<std::size_t>(config.state) >= s.size()) throw DomainError("state index beyond the solved states");
      CsvWriter csv(file("eigenvalues.csv"));
      csv.row({"index", "energy", "residual"});
      double worst = 0.0;
      json energies = json::array();
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = eigen_residual(ctx.hamiltonian, s[i]);
        worst = std::max(worst, r);
        csv.row({std::to_string(i), format_double(*s[i].energy), format_double(r)});
        energies.push_back(*s[i].energy);
      }
      const FullState &st = s[static_cast<std::size_t>(config.state)];
      ElectronicField psi(model.grid, model.levels);
      psi.values = st.psi;
      write_electronic_csv(file("state.csv"), psi);
      m["solve"] = {{"energies", energies}, {"eigen_residual", worst}};
      check("solve.eigen_residual", worst, tol.eigen_residual);
      if (model.reference.contains("energies")) {
        const auto ref = model.reference["energies"].get<std::vector<double>>();
        double dev = 0.0;
        for (std::size_t i = 0; i < ref.size() && i < s.size(); ++i) dev = std::max(dev, std::abs(*s[i].energy - ref[i]));
        m["solve"]["reference_deviation"] = dev;
        check("solve.reference_energies", dev, tol.reference_energy);
      }
      if (model.reference.contains("ground_energy")) {
        const double dev = std::abs(*s[0].energy - model.reference["ground_energy"].get<double>());
        m["solve"]["reference_deviation"] = dev;
        check("solve.reference_ground_energy", dev, tol.reference_energy);
      }
      return s;
    });
  }

  std::optional<StateAnalysis> analysis;
  if (stages.count("factorize")) {
    const FullState st = select_state(states, static_cast<std::size_t>(config.state), ctx.hamiltonian.weight);
    Factorization fact = staged("factorize", [&] {
      Factorization f = factorize(st, ctx.hamiltonian.weight, fopt);
      const double rec = reconstruction_error(f, st);
      const double norm = std::abs(f.chi_norm_squared() - 1.0);
      write_scalar_csv(file("chi.csv"), f.chi);
      write_electronic_csv(file("phi.csv"), f.phi);
      write_mask_csv(file("mask.csv"), model.grid, f.mask);
      m["factorize"] = {{"reconstruction", rec},
                        {"chi_norm_defect", norm},
                        {"masked_fraction", f.masked_fraction()},
                        {"convention", config.convention}};
      check("factorize.reconstruction", rec, tol.reconstruction);
      check("factorize.chi_norm", norm, tol.chi_norm);
      return f;
    });
    if (stages.count("geometry")) {
      staged("geometry", [&] {
        analysis.emplace(ctx, std::move(fact), Stationary{*st.energy}, gopt);
        const StateAnalysis &a = *analysis;
        const IdentityReport id = check_identities(ctx, a);
        const double op = operator_identity_defect(ctx.kinetic, ctx.metric, ctx.fd, smooth_test_function(model.grid));
        json g = id.to_json();
        g["operator_identity"] = op;
        g["imaginary_residue"] = a.calc.imaginary_residue();
        g["eps_bo_imaginary"] = a.geo.eps_bo_imaginary;
        check("geometry.metric_identity", id.metric_identity, tol.metric_identity);
        check("geometry.contraction", id.contraction, tol.metric_identity);
        check("geometry.christoffel_reconstruction", id.christoffel_reconstruction, tol.christoffel_reconstruction);
        check("geometry.christoffel_metric", id.christoffel_metric, tol.christoffel_metric);
        check("geometry.decomposition", id.decomposition, tol.decomposition);
        check("geometry.operator_identity", op, tol.operator_identity);
        const ElectronicField ad = adiabatic_state(ctx.h_bo, model.grid);
        json phases = json::array();
        for (int mu = 0; mu < model.grid.dim(); ++mu) {
          if (model.grid.axis(mu).boundary != Boundary::Periodic) continue;
          const double pad = loop_phase(ad, ctx.fd, mu);
          const double pef = loop_phase(a.fact.phi, ctx.fd, mu);
          phases.push_back({{"axis", mu}, {"adiabatic", pad}, {"exact_factorization", pef}});
          if (model.reference.contains("geometric_phase"))
            check("geometry.adiabatic_loop_phase",
                  std::abs(wrap_angle(pad - model.reference["geometric_phase"].get<double>())), tol.geometric_phase);
        }
        g["loop_phases"] = phases;
        m["geometry"] = g;
        write_scalar_csv(file("eps_bo.csv"), a.geo.eps_bo);
        write_scalar_csv(file("eps_geo.csv"), a.geo.eps_geo);
        write_tensor_csv(file("quantum_metric.csv"), a.geo.g, {"mu", "nu"});
        write_tensor_csv(file("geometric_tensor.csv"), a.geo.h, {"mu", "nu"});
        write_tensor_csv(file("vector_potential.csv"), a.calc.a(), {"mu"});
        write_tensor_csv(file("christoffel_first.csv"), a.geo.upsilon_first, {"lambda", "mu", "nu"});
        write_tensor_csv(file("christoffel_second.csv"), a.geo.upsilon_second, {"lambda", "mu", "nu"});
        write_mask_csv(file("flagged.csv"), model.grid, a.geo.flagged);
        return 0;
      });
    }
  }

  if (stages.count("residuals")) {
    staged("residuals", [&] {
      const ResidualReport &r = analysis->residuals;
      const double e = *states[static_cast<std::size_t>(config.state)].energy;
      m["residuals"] = r.to_json();
      check("residuals.nuclear", relative_or_absolute(r.nuclear_norm, e), tol.nuclear_residual);
      check("residuals.electronic", r.electronic_norm, tol.electronic_residual);
      check("residuals.phi_projection", r.phi_projection, tol.phi_projection);
      check("residuals.tangent_mismatch", r.projected.tangent_mismatch, tol.projected_mismatch);
      check("residuals.normal_mismatch", r.projected.normal_mismatch, tol.projected_mismatch);
      check("residuals.form_mismatch", r.form_mismatch, tol.form_mismatch);
      write_scalar_csv(file("nuclear_residual.csv"), r.nuclear);
      write_electronic_csv(file("electronic_residual.csv"), r.electronic);
      return 0;
    });
  }

  if (stages.count("dynamics")) {
    staged("dynamics", [&] {
      const FullState a = select_state(states, static_cast<std::size_t>(config.state), ctx.hamiltonian.weight);
      const FullState &b = states.size() > 1 ? states[config.state == 0 ? 1 : 0] : a;
      const DynamicsReport d = run_dynamics(ctx, a, b, config.dt, config.steps, fopt);
      m["dynamics"] = d.to_json();
      check("dynamics.norm_drift", d.norm_drift, tol.norm_drift);
      check("dynamics.energy_drift", d.energy_drift, tol.energy_drift);
      check("dynamics.a0", d.a0_error, d.a0_bound + 1e-12);
      if (d.a0_error > 1e-12) check("dynamics.a0_order", d.a0_order, 1.8, true);
      return 0;
    });
  }

  if (stages.count("gauge-sweep")) {
    staged("gauge-sweep", [&] {
      const double e = *states[static_cast<std::size_t>(config.state)].energy;
      const GaugeSweepReport g = gauge_sweep(ctx, *analysis, Stationary{e}, gopt, config.gauge_samples, config.seed);
      m["gauge_sweep"] = g.to_json();
      CsvWriter csv(file("gauge_sweep.csv"));
      csv.row({"quantity", "spread"});
      for (const auto &[k, v] : g.spread) {
        csv.row({k, format_double(v)});
        check("gauge_sweep." + k, v, tol.gauge_spread);
      }
      csv.row({"a_shift_error", format_double(g.a_shift_error)});
      if (g.samples > 0) check("gauge_sweep.a_shift", g.a_shift_error, tol.fd);
      return 0;
    });
  }

  if (stages.count("chart-sweep")) {
    staged("chart-sweep", [&] {
      json chart_ref = config.chart;
      json target_ref = config.chart_target;
      std::optional<CoordinateChart> chart;
      if (chart_ref.is_null() && model.chart) {
        chart = *model.chart;
        chart_ref = "model";
        if (target_ref.is_null() && model.reference.contains("chart_target"))
          target_ref = model.reference["chart_target"];
      } else {
        chart = resolve_chart(chart_ref, model.grid.dim());
      }
      std::optional<Model> target;
      if (!target_ref.is_null()) target = resolve_model(target_ref, config.nodes);
      const ChartSweepReport c =
          chart_sweep(ctx, *chart, target ? &*target : nullptr, config.states, config.state, fopt);
      json j = c.to_json();
      j["chart"] = chart_ref;
      j["target"] = target_ref;
      m["chart_sweep"] = j;
      CsvWriter csv(file("chart_sweep.csv"));
      csv.row({"index", "energy", "barred_energy"});
      for (std::size_t i = 0; i < c.energies.size(); ++i)
        csv.row({std::to_string(i), format_double(c.energies[i]), format_double(c.barred_energies[i])});
      check("chart_sweep.ground_energy", c.ground_delta, tol.chart_energy);
      check("chart_sweep.eps_bo", c.eps_bo_delta, tol.chart_field);
      check("chart_sweep.eps_geo", c.eps_geo_delta, tol.chart_field);
      check("chart_sweep.pi_transform", c.pi_residual, tol.fd);
      return 0;
    });
  }

  json list = json::array();
  for (const Assertion &a : res.assertions)
    list.push_back({{"name", a.name},
                    {"value", a.value},
                    {"tolerance", a.tolerance},
                    {"relation", a.at_least ? ">=" : "<="},
                    {"pass", a.pass}});
  m["assertions"] = list;
  m["passed"] = res.passed();
  std::ofstream(file("manifest.json")) << m.dump(2) << "\n";
  return res;
}

} // namespace efgeo
