#include <cmath>
#include <filesystem>
#include <numbers>

#include <doctest.h>

#include "efgeo/csv.hpp"
#include "efgeo/error.hpp"
#include "efgeo/expression.hpp"
#include "efgeo/finite_difference.hpp"
#include "efgeo/numerics.hpp"

using namespace efgeo;

namespace {

Grid line(int n, double lo, double hi, Boundary b) { return Grid({Axis{n, lo, hi, b}}); }

CVector sample(const Grid &g, double (*f)(double)) {
  CVector v(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) v[static_cast<Eigen::Index>(i)] = f(g.coordinates(i)[0]);
  return v;
}

double max_error(const Grid &g, const CVector &v, double (*f)(double)) {
  return (v - sample(g, f)).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("fornberg weights reproduce the classic central stencils") {
  const double x[] = {-1.0, 0.0, 1.0};
  const RMatrix w = fornberg_weights(0.0, x, 2);
  CHECK(w(1, 0) == doctest::Approx(-0.5));
  CHECK(w(1, 1) == doctest::Approx(0.0));
  CHECK(w(1, 2) == doctest::Approx(0.5));
  CHECK(w(2, 0) == doctest::Approx(1.0));
  CHECK(w(2, 1) == doctest::Approx(-2.0));
  CHECK(w(2, 2) == doctest::Approx(1.0));
  const double y[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
  const RMatrix v = fornberg_weights(0.0, y, 1);
  CHECK(v(1, 0) == doctest::Approx(1.0 / 12.0));
  CHECK(v(1, 1) == doctest::Approx(-8.0 / 12.0));
}

TEST_CASE("periodic derivative of sin converges at the configured order") {
  for (int order : {2, 4, 6}) {
    double prev = 0.0;
    for (int n : {32, 64}) {
      const Grid g = line(n, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic);
      const FiniteDifference fd(g, order);
      const double e = max_error(g, fd.derivative(sample(g, [](double x) { return std::sin(x); }), 0),
                                 [](double x) { return std::cos(x); });
      if (prev > 0.0) CHECK(std::log2(prev / e) == doctest::Approx(order).epsilon(0.05));
      prev = e;
    }
  }
}

TEST_CASE("one-sided clamped stencils are exact on low-degree polynomials") {
  const Grid g = line(21, -1.0, 2.0, Boundary::Clamped);
  const FiniteDifference fd(g, 4);
  const CVector f = sample(g, [](double x) { return x * x * x - 2.0 * x; });
  CHECK(max_error(g, fd.derivative(f, 0), [](double x) { return 3.0 * x * x - 2.0; }) < 1e-11);
  CHECK(max_error(g, fd.apply(f, 0, 2, EdgeRule::OneSided), [](double x) { return 6.0 * x; }) < 1e-9);
}

TEST_CASE("phase derivative ignores 2π jumps") {
  const Grid g = line(64, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic);
  const FiniteDifference fd(g);
  RVector th(64);
  for (int i = 0; i < 64; ++i) th[i] = std::remainder(3.0 * g.coordinates(static_cast<std::size_t>(i))[0], 2.0 * std::numbers::pi);
  CHECK((fd.phase_derivative(th, 0).array() - 3.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("Dirichlet closure treats the outside as zero") {
  const Grid g = line(5, 0.0, 4.0, Boundary::Clamped);
  const FiniteDifference fd(g, 2);
  CVector f = CVector::Zero(5);
  f[0] = 1.0;
  const CVector d = fd.apply(f, 0, 2, EdgeRule::Dirichlet);
  CHECK(std::abs(d[0] - cplx(-2.0)) < 1e-14);
  CHECK(std::abs(d[1] - cplx(1.0)) < 1e-14);
}

TEST_CASE("mixed second derivative of a separable function") {
  Grid g({Axis{31, -1.0, 1.0, Boundary::Clamped}, Axis{32, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic}});
  const FiniteDifference fd(g, 4);
  CVector f(static_cast<Eigen::Index>(g.size())), exact(f.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto q = g.coordinates(i);
    f[static_cast<Eigen::Index>(i)] = q[0] * q[0] * std::sin(q[1]);
    exact[static_cast<Eigen::Index>(i)] = 2.0 * q[0] * std::cos(q[1]);
  }
  CHECK((fd.second_derivative(f, 0, 1) - exact).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((fd.second_derivative(f, 0, 1) - fd.second_derivative(f, 1, 0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadrature weights") {
  const Grid g = line(11, 0.0, 1.0, Boundary::Clamped);
  const RVector q = quadrature_weights(g);
  CHECK(q.sum() == doctest::Approx(1.0));
  CHECK(q[0] == doctest::Approx(0.05));
  const RVector w = wavefunction_weights(g);
  CHECK(w[0] == doctest::Approx(0.1));
  ScalarField lin(g, sample(g, [](double x) { return 3.0 * x + 1.0; }));
  CHECK(std::abs(integrate(lin, RVector::Ones(11)) - cplx(2.5)) < 1e-13);
  const Grid p = line(16, 0.0, 2.0 * std::numbers::pi, Boundary::Periodic);
  ScalarField c(p, sample(p, [](double x) { return std::cos(x) * std::cos(x); }));
  CHECK(std::abs(integrate(c, RVector::Ones(16)) - cplx(std::numbers::pi)) < 1e-13);
}

TEST_CASE("hermitian eigensolve of a 2x2 oracle") {
  CMatrix h(2, 2);
  h << 1.0, cplx(0.0, 2.0), cplx(0.0, -2.0), 1.0;
  const auto pairs = hermitian_eigensolve(h, 2);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].value == doctest::Approx(-1.0));
  CHECK(pairs[1].value == doctest::Approx(3.0));
  for (const auto &p : pairs) {
    CHECK((h * p.vector - p.value * p.vector).norm() < 1e-13);
    CHECK(p.vector.norm() == doctest::Approx(1.0));
    Eigen::Index k;
    p.vector.cwiseAbs().maxCoeff(&k);
    CHECK(std::abs(p.vector[k].imag()) < 1e-14);
    CHECK(p.vector[k].real() > 0.0);
  }
  CHECK(std::abs(pairs[0].vector.dot(pairs[1].vector)) < 1e-14);
  CHECK(hermitian_defect(h) == 0.0);
}

TEST_CASE("Cayley step is unitary with phase 2 atan(E dt / 2)") {
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 0) = 1.5;
  h(1, 1) = -0.5;
  const double dt = 0.1;
  const CayleyStepper step(h, dt);
  CVector psi(2);
  psi << 0.6, cplx(0.0, 0.8);
  const CVector next = step.step(psi);
  CHECK(next.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(next[0] - psi[0] * std::polar(1.0, -2.0 * std::atan(1.5 * dt / 2.0))) < 1e-15);
  CHECK(std::abs(next[1] - psi[1] * std::polar(1.0, 2.0 * std::atan(0.5 * dt / 2.0))) < 1e-15);
  CHECK((unitary_step(h, psi, dt) - next).norm() < 1e-15);
}

TEST_CASE("expressions") {
  const std::map<std::string, double> p = {{"m", 2.0}};
  const double q[] = {0.5, 1.0};
  CHECK(Expression::compile("2^3^2", 1)(q) == doctest::Approx(512.0));
  CHECK(Expression::compile("-q1^2", 1)(q) == doctest::Approx(-0.25));
  CHECK(Expression::compile("m*q1 + sin(q2)/cbrt(8)", 2, p)(q) == doctest::Approx(1.0 + std::sin(1.0) / 2.0));
  CHECK(Expression::compile("exp(log(3))+sqrt(abs(-4))", 1)(q) == doctest::Approx(5.0));
  CHECK_THROWS_AS(Expression::compile("q2", 1), SchemaError);
  CHECK_THROWS_AS(Expression::compile("k*q1", 1), SchemaError);
  CHECK_THROWS_AS(Expression::compile("(q1", 1), SchemaError);
  CHECK_THROWS_AS(Expression::compile("q1 +", 1), SchemaError);
  CHECK_THROWS_WITH_AS(Expression::compile("q1 $ 2", 1), doctest::Contains("column 4"), SchemaError);
}

TEST_CASE("grid indexing and JSON round trip") {
  const Grid g({Axis{5, 0.0, 1.0, Boundary::Clamped}, Axis{6, 0.0, 6.0, Boundary::Periodic}});
  CHECK(g.size() == 30);
  CHECK(g.stride(1) == 1);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flat_index(g.multi_index(i)) == i);
  CHECK(g.coordinates(15)[0] == doctest::Approx(0.5));
  CHECK(g.coordinates(15)[1] == doctest::Approx(3.0));
  CHECK_THROWS_AS(Grid({Axis{3, 0.0, 1.0, Boundary::Clamped}}), DomainError);
  CHECK(Grid::from_json(g.to_json()) == g);
  CHECK_THROWS_AS(boundary_from_string("open"), SchemaError);
}

TEST_CASE("CSV output reads back exactly") {
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  const auto path = (std::filesystem::temp_directory_path() / "efgeo_numerics.csv").string();
  {
    CsvWriter w(path);
    w.row({"a", "b"});
    w.row({"x,y", "say \"hi\""});
  }
  const CsvTable t = read_csv(path);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == "x,y");
  CHECK(t.rows[0][1] == "say \"hi\"");
  CHECK(t.column("b") == 1);

  const Grid g = line(5, 0.0, 1.0, Boundary::Clamped);
  ElectronicField f(g, 2);
  f.values.setRandom();
  write_electronic_csv(path, f);
  CHECK((read_electronic_csv(path, g).values - f.values).norm() == 0.0);
}
