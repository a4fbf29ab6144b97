#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "efgeo/error.hpp"
#include "efgeo/geometry.hpp"
#include "efgeo/geometry_spec.hpp"

using namespace efgeo;

namespace {

//! (r, θ) for a particle of mass m in the plane.
MassMetricField polar(double m) {
  return MassMetricField(2, [m](const RVector &q) {
    RMatrix minv = RMatrix::Zero(2, 2);
    minv(0, 0) = 1.0 / m;
    minv(1, 1) = 1.0 / (m * q[0] * q[0]);
    return minv;
  });
}

CoordinateChart cubic() {
  return CoordinateChart(
      1, [](const RVector &q) { return RVector::Constant(1, q[0] * q[0] * q[0] + 2.0 * q[0]); },
      [](const RVector &x) {
        const double r = std::sqrt(x[0] * x[0] / 4.0 + 8.0 / 27.0);
        return RVector::Constant(1, std::cbrt(x[0] / 2.0 + r) + std::cbrt(x[0] / 2.0 - r));
      },
      [](const RVector &q) { return RMatrix::Constant(1, 1, 3.0 * q[0] * q[0] + 2.0); },
      [](const RVector &q) { return std::vector<RMatrix>{RMatrix::Constant(1, 1, 6.0 * q[0])}; });
}

RVector pt(double a) { return RVector::Constant(1, a); }
RVector pt(double a, double b) {
  RVector v(2);
  v << a, b;
  return v;
}

} // namespace

TEST_CASE("polar coordinates: Π matches the textbook Christoffel symbols") {
  const MassMetricField m = polar(3.0);
  const Rank3 p = compute_pi(m, pt(1.7, 0.4));
  CHECK(p(0, 1, 1) == doctest::Approx(-1.7).epsilon(1e-9));
  CHECK(p(1, 0, 1) == doctest::Approx(1.0 / 1.7).epsilon(1e-9));
  CHECK(p(1, 1, 0) == doctest::Approx(1.0 / 1.7).epsilon(1e-9));
  CHECK(std::abs(p(0, 0, 0)) < 1e-10);
  CHECK(std::abs(p(1, 1, 1)) < 1e-10);
  CHECK(m.volume_weight(pt(1.7, 0.4)) == doctest::Approx(3.0 * 1.7));
  CHECK(m.det_mass(pt(2.0, 0.0)) == doctest::Approx(36.0));
  const RVector div = divergence_coefficient(m, pt(1.7, 0.4));
  CHECK(div[0] == doctest::Approx(1.0 / (3.0 * 1.7)).epsilon(1e-9));
  CHECK(std::abs(div[1]) < 1e-10);
}

TEST_CASE("flat metric has vanishing Π") {
  const MassMetricField m = MassMetricField::flat({2.0, 5.0});
  CHECK(compute_pi(m, pt(0.3, -1.0)).max_abs() < 1e-12);
  CHECK(m.mass(pt(0.0, 0.0))(1, 1) == doctest::Approx(5.0));
}

TEST_CASE("exponential metric: Π¹₁₁ = 1") {
  const double mass = 2.0;
  const MassMetricField m(1, [mass](const RVector &q) { return RMatrix::Constant(1, 1, std::exp(-2.0 * q[0]) / mass); });
  for (double q : {-1.0, 0.0, 0.8}) CHECK(compute_pi(m, pt(q))(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("transformed Π agrees with Π recomputed from the pulled-back metric") {
  const CoordinateChart chart = cubic();
  const MassMetricField flat = MassMetricField::flat({20.0});
  const MassMetricField barred = pullback_metric(chart, flat);
  for (double q : {-1.2, -0.3, 0.0, 0.5, 1.1}) {
    const double via_rule = transform_pi(chart, pi_field(flat), pt(q))(0, 0, 0);
    const double recomputed = compute_pi(barred, chart.forward(pt(q)))(0, 0, 0);
    //! Π̄ = −6q / (3q² + 2)² for the flat mass
    const double j = 3.0 * q * q + 2.0;
    CHECK(via_rule == doctest::Approx(-6.0 * q / (j * j)).epsilon(1e-12));
    CHECK(std::abs(via_rule - recomputed) < 1e-8);
  }
  const MassMetricField m = polar(1.0);
  const CoordinateChart lin = CoordinateChart::linear((RMatrix(2, 2) << 2.0, 1.0, 0.0, 1.0).finished());
  const RVector q = pt(1.3, 0.2);
  const Rank3 a = transform_pi(lin, pi_field(m), q);
  const Rank3 b = compute_pi(pullback_metric(lin, m), lin.forward(q));
  CHECK(Rank3::max_abs_difference(a, b) < 1e-8);
}

TEST_CASE("charts: inverse, inverted and degeneracy") {
  const CoordinateChart chart = cubic();
  for (double q : {-2.0, 0.1, 1.5}) CHECK(chart.inverse(chart.forward(pt(q)))[0] == doctest::Approx(q).epsilon(1e-13));
  const CoordinateChart back = chart.inverted();
  const RVector x = chart.forward(pt(0.7));
  CHECK(back.jacobian(x)(0, 0) == doctest::Approx(1.0 / (3.0 * 0.49 + 2.0)));
  const double j = 3.0 * 0.49 + 2.0;
  CHECK(back.hessian(x)[0](0, 0) == doctest::Approx(-6.0 * 0.7 / (j * j * j)));
  const CoordinateChart bad(
      1, [](const RVector &q) { return RVector(q.array().cube()); }, [](const RVector &x) { return RVector::Constant(1, std::cbrt(x[0])); },
      [](const RVector &q) { return RMatrix::Constant(1, 1, 3.0 * q[0] * q[0]); },
      [](const RVector &q) { return std::vector<RMatrix>{RMatrix::Constant(1, 1, 6.0 * q[0])}; });
  CHECK_THROWS_AS(bad.jacobian(pt(0.0)), ChartDegeneracyError);
  CHECK(CoordinateChart::identity(2).jacobian(pt(1.0, 2.0)).isIdentity());
}

TEST_CASE("metric positivity is enforced") {
  const MassMetricField neg(1, [](const RVector &) { return RMatrix::Constant(1, 1, -1.0); });
  CHECK_THROWS_AS(neg.inverse_mass(pt(0.0)), MetricDegeneracyError);
  const MassMetricField skew(2, [](const RVector &) { return (RMatrix(2, 2) << 1.0, 0.5, 0.0, 1.0).finished(); });
  CHECK_THROWS(skew.inverse_mass(pt(0.0, 0.0)));
  const MassMetricField thin(2, [](const RVector &) { return (RMatrix(2, 2) << 1.0, 0.0, 0.0, 1e-14).finished(); });
  CHECK_THROWS_AS(thin.inverse_mass(pt(0.0, 0.0)), MetricDegeneracyError);
}

TEST_CASE("metric sampled on a grid") {
  const Grid g({Axis{5, 1.0, 2.0, Boundary::Clamped}, Axis{8, 0.0, 6.283185307179586, Boundary::Periodic}});
  const MetricOnGrid s = MetricOnGrid::sample(polar(2.0), g);
  CHECK(s.volume_weight[g.flat_index({4, 3})] == doctest::Approx(4.0));
  CHECK(s.inverse_mass_component(1, 1)[g.flat_index({0, 0})] == doctest::Approx(0.5));
  CHECK(s.pi[g.flat_index({2, 1})](0, 1, 1) == doctest::Approx(-1.5).epsilon(1e-9));
  CHECK_THROWS_AS(MetricOnGrid::sample(MassMetricField::flat({1.0}), g), ShapeMismatchError);
  ScalarField one = ScalarField::zeros(g);
  one.values.setOnes();
  //! area of the annulus 1 < r < 2 for m = 1: trapezoid in r is exact for w = r
  const MassMetricField unit = polar(1.0);
  CHECK(std::abs(integrate(one, unit) - cplx(3.0 * 3.141592653589793)) < 1e-12);
}

TEST_CASE("geometry description round trips through JSON and compiles") {
  const nlohmann::json j = {{"dim", 1},
                            {"forward", {"q1^3+2*q1"}},
                            {"inverse", {"cbrt(q1/2+sqrt(q1^2/4+8/27))+cbrt(q1/2-sqrt(q1^2/4+8/27))"}},
                            {"jacobian", {{"3*q1^2+2"}}},
                            {"hessian", {{{"6*q1"}}}},
                            {"metric_inverse", {{"1/(m*(3*q1^2+2)^2)"}}},
                            {"parameters", {{"m", 20.0}}},
                            {"j0", 1.0}};
  const GeometrySpec s = GeometrySpec::from_json(j);
  CHECK(GeometrySpec::from_json(s.to_json()) == s);
  const auto path = (std::filesystem::temp_directory_path() / "efgeo_geometry.json").string();
  write_geometry_spec(s, path);
  CHECK(read_geometry_spec(path) == s);
  CHECK(s.chart().forward(pt(1.0))[0] == doctest::Approx(3.0));
  const Rank3 p = compute_pi(s.metric(), pt(0.5));
  CHECK(p(0, 0, 0) == doctest::Approx(6.0 * 0.5 / (3.0 * 0.25 + 2.0)).epsilon(1e-9));

  nlohmann::json broken = j;
  broken["metric_inverse"] = {{"1/k"}};
  CHECK_THROWS_WITH_AS(GeometrySpec::from_json(broken), doctest::Contains("metric_inverse"), SchemaError);
  CHECK_NOTHROW(GeometrySpec::from_json(broken, "geometry", {{"k", 1.0}}));
  broken = j;
  broken["jacobian"] = {{"1", "2"}};
  CHECK_THROWS_AS(GeometrySpec::from_json(broken), SchemaError);
}
