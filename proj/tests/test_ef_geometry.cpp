#include <cmath>
#include <functional>
#include <numbers>

#include <doctest.h>

#include "efgeo/ef_geometry.hpp"
#include "efgeo/pipeline.hpp"

using namespace efgeo;

namespace {

Grid line(int n, double lo, double hi, Boundary b = Boundary::Clamped) { return Grid({Axis{n, lo, hi, b}}); }

Factorization build(const Grid &g, const std::function<double(double)> &chi,
                    const std::function<CVector(double)> &phi) {
  const RVector w = wavefunction_weights(g);
  const int n = static_cast<int>(phi(0.0).size());
  FullState s(g, n);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = g.coordinates(i)[0];
    s.psi.row(static_cast<Eigen::Index>(i)) = chi(q) * phi(q).transpose();
  }
  s.psi /= std::sqrt(s.norm_squared(w));
  return factorize(s, w);
}

double theta(double q) { return 0.8 * std::sin(q); }
double theta1(double q) { return 0.8 * std::cos(q); }
double theta2(double q) { return -0.8 * std::sin(q); }

CVector rotor(double q) {
  CVector v(2);
  v << std::cos(theta(q)), std::sin(theta(q));
  return v;
}

double gaussian(double q) { return std::exp(-0.5 * q * q); }

} // namespace

TEST_CASE("rotating real Φ: h = θ'², Υ = θ'θ'', A = 0") {
  const Grid g = line(201, -3.0, 3.0);
  const FiniteDifference fd(g);
  const Factorization f = build(g, gaussian, rotor);
  const CovariantCalculus calc(f, fd);
  CHECK(calc.a().max_abs() < 1e-13);
  const TensorField h = quantum_geometric_tensor(calc);
  const TensorField gm = quantum_metric(calc);
  double eh = 0.0, eu = 0.0;
  double asym = 0.0;
  const TensorField ups = quantum_christoffel_first(calc, &asym);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = g.coordinates(i)[0];
    const auto k = static_cast<Eigen::Index>(i);
    eh = std::max(eh, std::abs(h[{0, 0}][k] - theta1(q) * theta1(q)));
    eu = std::max(eu, std::abs(ups[{0, 0, 0}][k] - theta1(q) * theta2(q)));
    CHECK(std::abs(gm[{0, 0}][k] - h[{0, 0}][k].real()) < 1e-14);
  }
  CHECK(eh < 1e-5);
  CHECK(eu < 1e-4);
  CHECK(asym == 0.0);
  //! Υ reproduces the Christoffel symbol of the finite-differenced metric
  const TensorField gamma = christoffel_from_metric(gm, fd);
  double eg = 0.0;
  for (Eigen::Index k = 5; k + 5 < static_cast<Eigen::Index>(g.size()); ++k)
    eg = std::max(eg, std::abs(gamma[{0, 0, 0}][k] - ups[{0, 0, 0}][k].real()));
  CHECK(eg < 1e-4);
}

TEST_CASE("Q-independent Φ carries no geometry") {
  const Grid g = line(51, -3.0, 3.0);
  const Factorization f = build(g, gaussian, [](double) {
    CVector v(2);
    v << 0.6, cplx(0.0, 0.8);
    return v;
  });
  const CovariantCalculus calc(f, FiniteDifference(g));
  CHECK(quantum_geometric_tensor(calc).max_abs() < 1e-13);
  const MetricOnGrid m = MetricOnGrid::sample(MassMetricField::flat({1.0}), g);
  const EfGeometry geo = compute_ef_geometry(f, calc, m, std::vector<CMatrix>(g.size(), CMatrix::Identity(2, 2)));
  CHECK(geo.eps_geo.values.cwiseAbs().maxCoeff() < 1e-13);
  CHECK((geo.eps_bo.values.array() - 1.0).abs().maxCoeff() < 1e-14);
  //! h vanishes, so every node is flagged
  CHECK(std::all_of(geo.flagged.begin(), geo.flagged.end(), [](bool b) { return b; }));
}

TEST_CASE("ε_geo is the contraction ½ M g and ε_BO the electronic expectation") {
  const Grid g = line(101, -3.0, 3.0);
  const Factorization f = build(g, gaussian, rotor);
  const CovariantCalculus calc(f, FiniteDifference(g));
  const MassMetricField metric(1, [](const RVector &q) { return RMatrix::Constant(1, 1, 1.0 / (2.0 + q[0] * q[0])); });
  const MetricOnGrid m = MetricOnGrid::sample(metric, g);
  const TensorField gm = quantum_metric(calc);
  const ScalarField e = epsilon_geo(m, gm);
  for (Eigen::Index k = 0; k < e.values.size(); ++k)
    CHECK(std::abs(e.values[k] - 0.5 * m.inverse_mass[static_cast<std::size_t>(k)](0, 0) * gm[{0, 0}][k]) < 1e-15);

  std::vector<CMatrix> hbo(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = theta(g.coordinates(i)[0]);
    //! eigenvalue 2 along (cos t, sin t), -1 across it
    const CVector u = rotor(g.coordinates(i)[0]);
    CVector v(2);
    v << -std::sin(t), std::cos(t);
    hbo[i] = 2.0 * u * u.adjoint() - v * v.adjoint();
  }
  double imag = 1.0;
  const ScalarField eb = epsilon_bo(f.phi, hbo, &imag);
  CHECK((eb.values.array() - 2.0).abs().maxCoeff() < 1e-13);
  CHECK(imag < 1e-15);
}

TEST_CASE("covariant derivatives") {
  const Grid g = line(256, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic);
  const FiniteDifference fd(g);
  ScalarField f = ScalarField::zeros(g);
  CovectorField a(g, 1, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = g.coordinates(i)[0];
    f.values[static_cast<Eigen::Index>(i)] = std::polar(1.0, 2.0 * q);
    a[{0}][static_cast<Eigen::Index>(i)] = 2.0;
  }
  //! e^{2iQ} is covariantly constant for A = 2 with the minus sign
  CHECK(covariant_derivative(f, a, -1, fd).max_abs() < 1e-6);
  CHECK((covariant_derivative(f, a, +1, fd)[{0}] - cplx(0.0, 4.0) * f.values).cwiseAbs().maxCoeff() < 1e-6);
  const MetricOnGrid m = MetricOnGrid::sample(MassMetricField::flat({1.0}), g);
  CHECK(second_covariant_derivative(f, a, m, -1, fd).max_abs() < 1e-5);
  CovectorField none(g, 1, true);
  const TensorField dd = second_covariant_derivative(f, none, m, -1, fd);
  CHECK((dd[{0, 0}] + 4.0 * f.values).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("gauge change multiplies the covariant derivatives by exact phases") {
  const ModelContext ctx(builtin("avoided-crossing"), 4);
  const FullState s = solve_eigenstates(ctx.hamiltonian, 1)[0];
  const Factorization f = factorize(s, ctx.hamiltonian.weight);
  std::mt19937_64 rng(3);
  const GaugeFunction lam = random_gauge(ctx.model.grid, rng);
  const Factorization t = gauge_transform(f, lam.lambda);
  const CovariantCalculus c0(f, ctx.fd), c1(t, ctx.fd);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(ctx.model.grid.size()); ++i) {
    const cplx u = std::polar(1.0, lam.lambda.values[i].real());
    CHECK(std::abs(c1.d_chi(0)[i] - std::conj(u) * c0.d_chi(0)[i]) < 1e-12);
    CHECK((c1.d_phi(0).values.row(i) - u * c0.d_phi(0).values.row(i)).norm() < 1e-12);
    CHECK((c1.dd_phi(0, 0).values.row(i) - u * c0.dd_phi(0, 0).values.row(i)).norm() < 1e-10);
  }
}

TEST_CASE("tangent frame") {
  CVector phi = CVector::Zero(4), e2 = CVector::Zero(4);
  phi[0] = 1.0;
  e2[1] = cplx(0.0, 1.0);
  const Frame f = tangent_frame(phi, {0.5 * e2 + 0.1 * phi, 2.0 * e2});
  CHECK(f.rank == 1);
  REQUIRE(f.vectors.size() == 2);
  for (const CVector &v : f.vectors) {
    CHECK(std::abs(v.dot(phi)) < 1e-15);
    CHECK(std::abs(v.dot(e2)) < 1e-15);
    CHECK(v.norm() == doctest::Approx(1.0));
  }
  CHECK(std::abs(f.vectors[0].dot(f.vectors[1])) < 1e-15);
  CHECK(tangent_frame(phi, {CVector::Zero(4)}).rank == 0);
  CHECK(tangent_frame(phi, {CVector::Zero(4)}).vectors.size() == 3);
}

TEST_CASE("second derivative of Φ decomposes onto Φ, D Φ and the frame") {
  const Grid g = line(121, -3.0, 3.0);
  const Factorization f = build(g, gaussian, [](double q) {
    CVector v(3);
    v << std::cos(q), std::sin(q) * std::cos(0.5 * q), cplx(0.0, std::sin(q) * std::sin(0.5 * q));
    return v;
  });
  const CovariantCalculus calc(f, FiniteDifference(g));
  const auto frames = tangent_frames(calc);
  const Decomposition d = decompose_second_derivative(calc, frames);
  CHECK(d.residual.maxCoeff() < 1e-10);
  const MetricOnGrid m = MetricOnGrid::sample(MassMetricField::flat({1.0}), g);
  const EfGeometry geo = compute_ef_geometry(f, calc, m, std::vector<CMatrix>(g.size(), CMatrix::Zero(3, 3)));
  CHECK(geo.reconstruction_error < 1e-10);
  CHECK(std::none_of(geo.flagged.begin(), geo.flagged.end(), [](bool b) { return b; }));
  const TensorField gm = quantum_metric(calc);
  CHECK(TensorField::max_abs_difference(gm, geo.g) == 0.0);
}

TEST_CASE("Christoffel symbols of an analytic metric") {
  const Grid g = line(41, -1.0, 1.0);
  TensorField gm(g, 2, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = g.coordinates(i)[0];
    gm[{0, 0}][static_cast<Eigen::Index>(i)] = q * q + 1.0;
  }
  const TensorField c = christoffel_from_metric(gm, FiniteDifference(g));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(c[{0, 0, 0}][static_cast<Eigen::Index>(i)].real() == doctest::Approx(g.coordinates(i)[0]).epsilon(1e-10));

  TensorField h(g, 2), u(g, 3);
  h[{0, 0}].setConstant(2.0);
  h[{0, 0}][3] = 0.0;
  u[{0, 0, 0}].setConstant(1.0);
  const ChristoffelSecond s = quantum_christoffel_second(h, u);
  CHECK(s.flagged[3]);
  CHECK(std::count(s.flagged.begin(), s.flagged.end(), true) == 1);
  CHECK(std::abs(s.upsilon[{0, 0, 0}][0] - 0.5) < 1e-15);
  CHECK(s.upsilon[{0, 0, 0}][3] == cplx(0.0));
}
