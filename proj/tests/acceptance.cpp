#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "efgeo/pipeline.hpp"

using namespace efgeo;

namespace {

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool at_least = false;
  bool ok() const { return std::isfinite(value) && (at_least ? value >= limit : value <= limit); }
};

int failures = 0;

//! One line per criterion: verdict, then every measured value against its bound.
void report(int id, const std::string &title, const std::vector<Check> &checks, bool expect_fail = false) {
  bool pass = true;
  std::string detail;
  for (const Check &c : checks) {
    pass = pass && (expect_fail ? !c.ok() : c.ok());
    char buf[160];
    std::snprintf(buf, sizeof buf, " %s=%.3g%s%.3g%s", c.name.c_str(), c.value, c.at_least ? ">=" : "<=", c.limit,
                  c.ok() ? "" : "!");
    detail += buf;
  }
  if (!pass) ++failures;
  std::printf("%s %d %s:%s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

double wrap(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }

struct Case {
  ModelContext ctx;
  std::vector<FullState> states;
  FullState state;
  StateAnalysis analysis;

  Case(Model m, int nstates = 4)
      : ctx(std::move(m), 4), states(solve_eigenstates(ctx.hamiltonian, nstates)),
        state(select_state(states, 0, ctx.hamiltonian.weight)),
        analysis(ctx, factorize(state, ctx.hamiltonian.weight), Stationary{*state.energy}) {}

  double energy() const { return *state.energy; }
  double nuclear_relative() const { return analysis.residuals.nuclear_norm / std::abs(energy()); }
};

Model model(const std::string &name, std::optional<int> nodes = std::nullopt) {
  return resolve_model({{"builtin", name}}, nodes);
}

} // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  constexpr double fd_tol = 1e-5;

  std::map<std::string, std::unique_ptr<Case>> builtins;
  for (const std::string &name : builtin_names()) builtins[name] = std::make_unique<Case>(model(name));

  // 1
  {
    std::vector<Check> c;
    for (const auto &[name, b] : builtins)
      c.push_back({name, reconstruction_error(b->analysis.fact, b->state), 1e-12});
    report(1, "reconstruction", c);
  }

  // 2
  std::map<int, std::unique_ptr<Case>> ladder;
  for (int n : {101, 201, 401}) ladder[n] = std::make_unique<Case>(model("avoided-crossing", n));
  {
    const Case &c = *ladder[201];
    auto order = [&](auto f, int a, int b) { return std::log2(f(*ladder[a]) / f(*ladder[b])); };
    auto nuc = [](const Case &x) { return x.analysis.residuals.nuclear_norm; };
    auto ele = [](const Case &x) { return x.analysis.residuals.electronic_norm; };
    report(2, "stationary residuals",
           {{"nuclear/|E|", c.nuclear_relative(), 1e-5},
            {"electronic", c.analysis.residuals.electronic_norm, 1e-4},
            {"nuclear_order_101_201", order(nuc, 101, 201), 3.5, true},
            {"nuclear_order_201_401", order(nuc, 201, 401), 3.5, true},
            {"electronic_order_101_201", order(ele, 101, 201), 3.5, true},
            {"electronic_order_201_401", order(ele, 201, 401), 3.5, true}});
  }

  // 3
  GaugeSweepReport jt_sweep;
  {
    std::vector<Check> c;
    const Case &ac = *ladder[201];
    const Case &jt = *builtins.at("jahn-teller-ring");
    for (const auto &[label, cs] : {std::pair{"avoided-crossing", &ac}, std::pair{"jahn-teller-ring", &jt}}) {
      const GaugeSweepReport r =
          gauge_sweep(cs->ctx, cs->analysis, Stationary{cs->energy()}, EfGeometryOptions{}, 5, 2024);
      double spread = 0.0;
      std::string worst;
      for (const auto &[k, v] : r.spread)
        if (v >= spread) {
          spread = v;
          worst = k;
        }
      c.push_back({std::string(label) + ".spread(" + worst + ")", spread, 1e-8});
      c.push_back({std::string(label) + ".a_shift", r.a_shift_error, fd_tol});
      if (cs == &jt) jt_sweep = r;
    }
    report(3, "gauge invariance", c);
  }

  // 4
  {
    const Model curv = model("curvilinear-remap");
    const CoordinateChart chart = *curv.chart;
    const ModelContext c201(model("curvilinear-remap", 201), 4);
    const Model t201 = model("avoided-crossing", 201);
    const ChartSweepReport coarse = chart_sweep(c201, chart, &t201, 1, 0, {});
    const ModelContext c401(model("curvilinear-remap", 401), 4);
    const Model t401 = model("avoided-crossing", 401);
    const ChartSweepReport fine = chart_sweep(c401, chart, &t401, 1, 0, {});
    report(4, "coordinate invariance",
           {{"ground_delta@201", coarse.ground_delta, 1e-5},
            {"eps_bo@401", fine.eps_bo_delta, 1e-4},
            {"eps_geo@401", fine.eps_geo_delta, 1e-4},
            {"pi_transform", std::max(coarse.pi_residual, fine.pi_residual), fd_tol}});
  }

  // 5
  const ModelContext &curv = builtins.at("curvilinear-remap")->ctx;
  const CVector probe = smooth_test_function(curv.model.grid);
  {
    const ModelContext c201(model("curvilinear-remap", 201), 4);
    report(5, "operator identity",
           {{"defect@201", operator_identity_defect(c201.kinetic, c201.metric, c201.fd, smooth_test_function(c201.model.grid)), 1e-6},
            {"defect@601", operator_identity_defect(curv.kinetic, curv.metric, curv.fd, probe), 1e-6}});
  }

  // 6
  {
    const Case &c = *ladder[401];
    const IdentityReport id = check_identities(c.ctx, c.analysis);
    const ResidualReport &r = c.analysis.residuals;
    report(6, "identity suite",
           {{"christoffel_reconstruction", id.christoffel_reconstruction, 1e-10},
            {"re_upsilon_vs_gamma", id.christoffel_metric, fd_tol},
            {"decomposition", id.decomposition, 1e-8},
            {"phi_projection", r.phi_projection, 1e-6},
            {"tangent_mismatch", r.projected.tangent_mismatch, 1e-8},
            {"normal_mismatch", r.projected.normal_mismatch, 1e-8}});
  }

  // 7
  {
    std::vector<Check> c;
    double g = 0.0, contraction = 0.0;
    for (const auto &[name, b] : builtins) {
      const IdentityReport id = check_identities(b->ctx, b->analysis);
      g = std::max(g, id.metric_identity);
      contraction = std::max(contraction, id.contraction);
    }
    report(7, "contraction and g = Re h", {{"g_vs_re_h", g, 1e-10}, {"contraction", contraction, 1e-10}});
  }

  // 8
  {
    const ModelContext &jt = builtins.at("jahn-teller-ring")->ctx;
    const double phase = loop_phase(adiabatic_state(jt.h_bo, jt.model.grid), jt.fd, 0);
    report(8, "geometric phase",
           {{"|phase-pi|", std::abs(wrap(phase - std::numbers::pi)), 1e-3},
            {"adiabatic_sweep", jt_sweep.spread.at("adiabatic_loop_phase"), 1e-8},
            {"ef_sweep", jt_sweep.spread.at("loop_phase"), 1e-8}});
  }

  // 9
  {
    const Case &c = *ladder[201];
    const DynamicsReport d = run_dynamics(c.ctx, c.states[0], c.states[1], 0.01, 1000, {});
    report(9, "dynamics",
           {{"norm_drift", d.norm_drift, 1e-12},
            {"energy_drift", d.energy_drift, 1e-8},
            {"a0_error", d.a0_error, d.a0_bound},
            {"a0_order", d.a0_order, 1.8, true}});
  }

  // 10
  {
    const Case &c = *ladder[201];
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    FullState s = c.state;
    for (Eigen::Index i = 0; i < s.psi.rows(); ++i)
      for (Eigen::Index l = 0; l < s.psi.cols(); ++l) s.psi(i, l) = cplx(n(rng), n(rng));
    s.psi /= std::sqrt(s.norm_squared(c.ctx.hamiltonian.weight));
    const StateAnalysis bad(c.ctx, factorize(s, c.ctx.hamiltonian.weight), Stationary{c.energy()});
    MetricOnGrid flipped = curv.metric;
    for (Rank3 &p : flipped.pi)
      for (double &x : p.data) x = -x;
    //! each check is the regular assertion and must fail
    report(10, "negative controls",
           {{"random.nuclear/|E|", bad.residuals.nuclear_norm / std::abs(c.energy()), 1e-5},
            {"random.electronic", bad.residuals.electronic_norm, 1e-4},
            {"flipped_pi.defect", operator_identity_defect(curv.kinetic, flipped, curv.fd, probe), 1e-6}},
           true);
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s: %d of 10 criteria failed (%.0f s)\n", failures ? "FAIL" : "PASS", failures, secs);
  return failures ? 1 : 0;
}
