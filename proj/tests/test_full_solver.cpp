#include <cmath>
#include <numbers>

#include <doctest.h>

#include "efgeo/error.hpp"
#include "efgeo/full_solver.hpp"
#include "efgeo/pipeline.hpp"

using namespace efgeo;

namespace {

Grid line(int n, double lo, double hi, Boundary b = Boundary::Clamped) { return Grid({Axis{n, lo, hi, b}}); }

BoHamiltonianField harmonic(double k) {
  return BoHamiltonianField(1, [k](const RVector &q) { return CMatrix::Constant(1, 1, 0.5 * k * q[0] * q[0]); });
}

BoHamiltonianField zero_potential() {
  return BoHamiltonianField(1, [](const RVector &) { return CMatrix::Zero(1, 1); });
}

} // namespace

TEST_CASE("harmonic oscillator spectrum at 201 nodes") {
  const double m = 2.0, k = 0.5, w = std::sqrt(k / m);
  const Grid g = line(201, -10.0, 10.0);
  const MassMetricField metric = MassMetricField::flat({m});
  const FullHamiltonian h = build_full_hamiltonian(build_kinetic_operator(g, metric), harmonic(k));
  const auto states = solve_eigenstates(h, 5);
  for (int n = 0; n < 5; ++n) {
    CHECK(std::abs(*states[n].energy / (w * (n + 0.5)) - 1.0) < 1e-4);
    CHECK(states[n].norm_squared(h.weight) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eigen_residual(h, states[n]) < 1e-9);
    CHECK(h.expectation(states[n]) == doctest::Approx(*states[n].energy).epsilon(1e-12));
  }
  //! virial: ⟨T⟩ = E/2
  CHECK(kinetic_energy_expectation(states[0], metric) == doctest::Approx(0.25 * w).epsilon(1e-4));
}

TEST_CASE("free particle on a ring") {
  const Grid g = line(128, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic);
  const FullHamiltonian h = build_full_hamiltonian(build_kinetic_operator(g, MassMetricField::flat({1.0})), zero_potential());
  const auto s = solve_eigenstates(h, 5);
  const double expect[] = {0.0, 0.5, 0.5, 2.0, 2.0};
  for (int i = 0; i < 5; ++i) CHECK(std::abs(*s[i].energy - expect[i]) < 1e-5);
}

TEST_CASE("kinetic operator is symmetric in the weighted inner product") {
  const Grid g = line(101, -1.0, 1.0);
  const MassMetricField metric(1, [](const RVector &q) { return RMatrix::Constant(1, 1, std::exp(-2.0 * q[0]) / 3.0); });
  const KineticOperator t = build_kinetic_operator(g, metric);
  CHECK(t.asymmetry < 1e-12);
  const RMatrix s = t.symmetric();
  CHECK((s - s.transpose()).norm() < 1e-12 * s.norm());
  //! W T is positive semidefinite, so the lowest eigenvalue is positive with walls
  Eigen::SelfAdjointEigenSolver<RMatrix> es(s);
  CHECK(es.eigenvalues()[0] > 0.0);
}

TEST_CASE("Podolsky operator equals the Π form on a curved 1-D metric") {
  const Grid g = line(201, -2.0, 2.0);
  const MassMetricField metric(1, [](const RVector &q) { return RMatrix::Constant(1, 1, std::exp(-2.0 * q[0]) / 20.0); });
  const FiniteDifference fd(g, 4);
  const KineticOperator t = build_kinetic_operator(g, metric);
  const MetricOnGrid on_grid = MetricOnGrid::sample(metric, g);
  CHECK(operator_identity_defect(t, on_grid, fd, smooth_test_function(g)) < 1e-6);
}

TEST_CASE("propagation keeps the norm and rotates eigenstates by the Cayley phase") {
  const Grid g = line(81, -8.0, 8.0);
  const FullHamiltonian h = build_full_hamiltonian(build_kinetic_operator(g, MassMetricField::flat({1.0})), harmonic(1.0));
  const auto s = solve_eigenstates(h, 2);
  const double dt = 0.05;
  const Trajectory tr = propagate(h, s[0], dt, 10, 5);
  REQUIRE(tr.states.size() == 3);
  CHECK(tr.times.back() == doctest::Approx(0.5));
  const cplx phase = std::polar(1.0, -10.0 * 2.0 * std::atan(*s[0].energy * dt / 2.0));
  CHECK((tr.states.back().psi - phase * s[0].psi).cwiseAbs().maxCoeff() < 1e-10);

  FullState mix = s[0];
  mix.psi = (s[0].psi + s[1].psi) / std::sqrt(2.0);
  mix.energy.reset();
  const Trajectory tm = propagate(h, mix, dt, 200);
  for (const FullState &st : tm.states) CHECK(st.norm_squared(h.weight) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.expectation(tm.states.back()) == doctest::Approx(h.expectation(mix)).epsilon(1e-12));
}

TEST_CASE("full Hamiltonian couples levels through the electronic matrix") {
  const Grid g = line(41, -4.0, 4.0);
  const BoHamiltonianField hbo(2, [](const RVector &) {
    CMatrix m(2, 2);
    m << 0.0, 0.1, 0.1, 1.0;
    return m;
  });
  const FullHamiltonian h = build_full_hamiltonian(build_kinetic_operator(g, MassMetricField::flat({1.0})), hbo);
  CHECK(h.matrix.rows() == 82);
  CHECK(hermitian_defect(h.matrix) < 1e-14);
  //! constant coupling: the spectrum is the box spectrum shifted by the two electronic eigenvalues
  const auto s = solve_eigenstates(h, 1);
  const FullHamiltonian box = build_full_hamiltonian(build_kinetic_operator(g, MassMetricField::flat({1.0})),
                                                     zero_potential());
  const double lowest = 0.5 - std::sqrt(0.25 + 0.01);
  CHECK(*s[0].energy == doctest::Approx(*solve_eigenstates(box, 1)[0].energy + lowest).epsilon(1e-12));
}

TEST_CASE("electronic Hamiltonian validation") {
  const BoHamiltonianField bad(2, [](const RVector &) {
    CMatrix m(2, 2);
    m << 0.0, 1.0, 0.5, 0.0;
    return m;
  });
  CHECK_THROWS_AS(bad(RVector::Zero(1)), NotHermitianError);
  const BoHamiltonianField shape(2, [](const RVector &) { return CMatrix::Zero(3, 3); });
  CHECK_THROWS_AS(shape(RVector::Zero(1)), ShapeMismatchError);
  CHECK_THROWS_AS(BoHamiltonianField(0, nullptr), DomainError);
  const FullHamiltonian h = build_full_hamiltonian(build_kinetic_operator(line(11, 0.0, 1.0), MassMetricField::flat({1.0})),
                                                   zero_potential());
  CHECK_THROWS_AS(solve_eigenstates(h, 0), DomainError);
  CHECK_THROWS_AS(propagate(h, FullState(h.grid, 1), 0.1, -1), DomainError);
}

TEST_CASE("state flattening round trip") {
  const Grid g = line(5, 0.0, 1.0);
  FullState s(g, 2);
  s.psi.setZero();
  s.psi.topRows(3) << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const CVector f = s.flat();
  CHECK(f[1] == cplx(2.0));
  CHECK(f[2] == cplx(3.0));
  CHECK(FullState::from_flat(g, 2, f).psi == s.psi);
  CHECK_THROWS_AS(FullState::from_flat(g, 2, CVector::Zero(7)), ShapeMismatchError);
}
