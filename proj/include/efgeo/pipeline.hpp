#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "efgeo/ef_residuals.hpp"
#include "efgeo/error.hpp"
#include "efgeo/models.hpp"

namespace efgeo {

//! Pass thresholds of every assertion made by `run`.
struct Tolerances {
  double eigen_residual = 1e-9;
  double reference_energy = 1e-4;
  double reconstruction = 1e-12;
  double chi_norm = 1e-10;
  double metric_identity = 1e-10;
  double christoffel_reconstruction = 1e-10;
  //! Density-weighted Re Υ against Γ from the differentiated metric.
  double christoffel_metric = 1e-5;
  double decomposition = 1e-8;
  //! Relative to |E| when |E| > 1e-8, absolute otherwise.
  double nuclear_residual = 1e-5;
  double electronic_residual = 1e-4;
  double phi_projection = 1e-6;
  double projected_mismatch = 1e-8;
  double form_mismatch = 1e-8;
  double operator_identity = 1e-6;
  double gauge_spread = 1e-8;
  double fd = 1e-5;
  double chart_energy = 1e-5;
  double chart_field = 1e-4;
  double norm_drift = 1e-12;
  double energy_drift = 1e-8;
  double geometric_phase = 1e-3;

  //! "default", "loose" (x100) or "absurd" (x1e-30, every assertion fails).
  static Tolerances profile(const std::string &name);
  nlohmann::json to_json() const;
  //! Overrides the fields present in `j`; unknown keys are a SchemaError.
  void update(const nlohmann::json &j);
};

//! Stage names in execution order.
const std::vector<std::string> &stage_names();

struct RunConfig {
  //! {"builtin": name}, {"path": file} or an inline model object.
  nlohmann::json model = {{"builtin", "avoided-crossing"}};
  std::vector<std::string> stages = {"solve"};
  //! Overrides the node count of every axis when set.
  std::optional<int> nodes;
  int fd_order = 4;
  double eps_node = 1e-12;
  double cond_cap = 1e8;
  double rank_tolerance = 1e-8;
  int states = 4;
  //! Index of the eigenstate that is factorized and analysed.
  int state = 0;
  double dt = 0.01;
  int steps = 1000;
  int gauge_samples = 5;
  std::string convention = "chi-real-positive";
  //! null (model chart, else identity), a chart name or an inline chart.
  nlohmann::json chart;
  //! Model the barred coordinates are compared against; null transforms the model.
  nlohmann::json chart_target;
  std::string out = "efgeo-out";
  std::uint64_t seed = 0;
  std::string tolerance_profile = "default";
  nlohmann::json tolerance_overrides = nlohmann::json::object();
  //! 0 keeps the library default.
  int threads = 0;

  Tolerances tolerances() const;
  nlohmann::json to_json() const;
  //! Missing keys keep their defaults; unknown keys and bad stage names are a SchemaError.
  static RunConfig from_json(const nlohmann::json &j);
};

//! Resolves a model reference of the RunConfig form.
Model resolve_model(const nlohmann::json &ref, std::optional<int> nodes = std::nullopt);

//! Named charts: "identity" and "cubic" (Q = Q̄³ + 2Q̄, 1-D), or a JSON chart
//! with forward, inverse, jacobian and hessian expressions.
CoordinateChart resolve_chart(const nlohmann::json &ref, int dim);

//! Everything derived from a model that does not depend on the state.
struct ModelContext {
  Model model;
  FiniteDifference fd;
  MetricOnGrid metric;
  std::vector<CMatrix> h_bo;
  KineticOperator kinetic;
  FullHamiltonian hamiltonian;

  ModelContext(Model m, int fd_order);
};

//! Factorization, covariant calculus, geometry and residuals of one state.
struct StateAnalysis {
  Factorization fact;
  CovariantCalculus calc;
  EfGeometry geo;
  ResidualReport residuals;

  StateAnalysis(const ModelContext &ctx, Factorization f, const TimeMode &mode, const EfGeometryOptions &opt = {});
};

//! states[index], or, when it shares its energy with a neighbour, the
//! combination of the pair whose nuclear density has the largest minimum.
FullState select_state(const std::vector<FullState> &states, std::size_t index, const RVector &weight,
                       double degeneracy = 1e-9);

//! max over unmasked nodes of ‖χΦ − Ψ‖.
double reconstruction_error(const Factorization &fact, const FullState &psi);

//! ‖(Ĥ − E)Ψ‖ in the weighted norm.
double eigen_residual(const FullHamiltonian &h, const FullState &s);

struct IdentityReport {
  double metric_identity = 0.0;      // max |g − Re h|
  double contraction = 0.0;          // max |ε_geo − ½M^{μν} Re h_{μν}|
  double christoffel_reconstruction = 0.0;
  double christoffel_metric = 0.0;   // density-weighted |Re Υ − Γ(g)|, unflagged nodes
  double decomposition = 0.0;
  double upsilon_asymmetry = 0.0;
  double flagged_fraction = 0.0;
  nlohmann::json to_json() const;
};

IdentityReport check_identities(const ModelContext &ctx, const StateAnalysis &a);

//! max node-wise |T̂χ − (−½M^{μν}∂_μ∂_νχ + ½M^{μν}Π^λ_{μν}∂_λχ)| with T̂ the
//! discretized Podolsky operator and Π, M taken from `metric`.
double operator_identity_defect(const KineticOperator &kinetic, const MetricOnGrid &metric,
                                const FiniteDifference &fd, const CVector &chi);

//! Gaussian centred in the domain, narrow enough to vanish at clamped walls.
CVector smooth_test_function(const Grid &grid);

//! Lowest eigenvector of Ĥ^BO at every node.
ElectronicField adiabatic_state(const std::vector<CMatrix> &h_bo, const Grid &grid);

//! Loop phase of `phi` along `axis` (periodic) through node 0.
double loop_phase(const ElectronicField &phi, const FiniteDifference &fd, int axis);

struct GaugeFunction {
  ScalarField lambda;
  CovectorField gradient;
};

//! Σ over axes of five seeded modes with coefficients in [−1, 1]: Fourier
//! modes on periodic axes, Chebyshev T1..T5 on clamped ones.
GaugeFunction random_gauge(const Grid &grid, std::mt19937_64 &rng);

struct GaugeSweepReport {
  int samples = 0;
  //! Largest change of each gauge-invariant quantity over all samples.
  std::map<std::string, double> spread;
  //! max |A' − A − ∂λ| over all samples.
  double a_shift_error = 0.0;
  nlohmann::json to_json() const;
};

GaugeSweepReport gauge_sweep(const ModelContext &ctx, const StateAnalysis &base, const TimeMode &mode,
                             const EfGeometryOptions &opt, int count, std::uint64_t seed);

struct ChartSweepReport {
  std::vector<double> energies, barred_energies;
  double ground_delta = 0.0;   // relative
  double max_energy_delta = 0.0;
  double eps_bo_delta = 0.0;
  double eps_geo_delta = 0.0;
  double pi_residual = 0.0;
  std::size_t compared_nodes = 0;
  nlohmann::json to_json() const;
};

//! Solves the model in its own and in the barred coordinates of `chart`
//! (Q -> Q̄) and compares. The barred model is `target` if given, else the
//! transform of `base` onto the mapped grid.
ChartSweepReport chart_sweep(const ModelContext &base, const CoordinateChart &chart, const Model *target,
                             int states, int state, const FactorizeOptions &fopt);

//! Tensor-product Lagrange interpolation with `points` nodes per axis.
double interpolate(const Grid &grid, const RVector &values, const RVector &q, int points = 6);

struct DynamicsReport {
  int steps = 0;
  double dt = 0.0;
  double norm_drift = 0.0;    // max per step
  double energy_drift = 0.0;  // max relative over the run
  double a0_error = 0.0;      // density-weighted |A₀ + E| at dt
  double a0_bound = 0.0;      // E³dt²/2
  double a0_order = 0.0;      // observed from dt and dt/2
  nlohmann::json to_json() const;
};

//! Propagates an equal superposition of two eigenstates, and the first one
//! alone for A₀.
DynamicsReport run_dynamics(const ModelContext &ctx, const FullState &first, const FullState &second, double dt,
                            int steps, const FactorizeOptions &fopt);

struct Assertion {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  //! Lower bound instead of upper bound.
  bool at_least = false;
  bool pass = false;
};

//! Failure inside one pipeline stage.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string &what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

private:
  std::string stage_;
};

struct RunResult {
  nlohmann::json manifest;
  std::vector<Assertion> assertions;
  bool passed() const;
};

//! Runs the configured stages, writing CSVs and manifest.json to config.out.
RunResult run(const RunConfig &config);

} // namespace efgeo
