#pragma once

#include <functional>
#include <vector>

#include "efgeo/fields.hpp"

namespace efgeo {

//! Dense d x d x d real array, index order (upper, lower, lower) for Π.
struct Rank3 {
  int dim = 0;
  std::vector<double> data;

  Rank3() = default;
  explicit Rank3(int d) : dim(d), data(static_cast<std::size_t>(d * d * d), 0.0) {}
  double &operator()(int a, int b, int c) { return data[static_cast<std::size_t>((a * dim + b) * dim + c)]; }
  double operator()(int a, int b, int c) const {
    return data[static_cast<std::size_t>((a * dim + b) * dim + c)];
  }
  double max_abs() const;
  static double max_abs_difference(const Rank3 &x, const Rank3 &y);
};

using PointMap = std::function<RVector(const RVector &)>;
using PointMatrixMap = std::function<RMatrix(const RVector &)>;
//! Entry [mu](nu, lambda) is ∂²Q̄^mu / ∂Q^nu ∂Q^lambda.
using PointHessianMap = std::function<std::vector<RMatrix>(const RVector &)>;

//! Smooth invertible change of coordinates Q -> Q̄ with analytic derivatives.
class CoordinateChart {
public:
  CoordinateChart(int dim, PointMap forward, PointMap inverse, PointMatrixMap jacobian,
                  PointHessianMap hessian);

  static CoordinateChart identity(int dim);
  //! Q̄ = T Q for a constant invertible T.
  static CoordinateChart linear(const RMatrix &t);

  int dim() const { return dim_; }
  RVector forward(const RVector &q) const { return forward_(q); }
  RVector inverse(const RVector &qbar) const { return inverse_(qbar); }
  //! ∂Q̄^mu/∂Q^nu at Q; throws ChartDegeneracyError when singular.
  RMatrix jacobian(const RVector &q) const;
  std::vector<RMatrix> hessian(const RVector &q) const { return hessian_(q); }

  //! ∂Q^rho/∂Q̄^mu at Q (inverse of the jacobian).
  RMatrix inverse_jacobian(const RVector &q) const;
  //! ∂²Q^rho/∂Q̄^mu∂Q̄^nu at Q, derived from the forward hessian.
  std::vector<RMatrix> inverse_hessian(const RVector &q) const;

  //! Chart running the other way, Q̄ -> Q.
  CoordinateChart inverted() const;

  double jacobian_floor = 1e-12;

private:
  int dim_;
  PointMap forward_, inverse_;
  PointMatrixMap jacobian_;
  PointHessianMap hessian_;
};

//! Q-dependent inverse mass tensor M^{mu nu}(Q) and everything derived from it.
//!
//! Metric derivatives are central finite differences of the supplied function
//! with step `fd_step` and order `fd_order`; the function must be defined a few
//! steps beyond the grid.
class MassMetricField {
public:
  MassMetricField(int dim, PointMatrixMap inverse_mass, double j0 = 1.0);

  //! Constant M^{mu nu} = inverse of diag(masses).
  static MassMetricField flat(const std::vector<double> &masses, double j0 = 1.0);

  int dim() const { return dim_; }
  double j0() const { return j0_; }

  //! M^{mu nu}(Q), checked symmetric positive definite.
  RMatrix inverse_mass(const RVector &q) const;
  //! M_{mu nu}(Q).
  RMatrix mass(const RVector &q) const;
  double det_mass(const RVector &q) const;
  double volume_weight(const RVector &q) const;

  int fd_order = 4;
  double fd_step = 1e-3;
  //! Smallest eigenvalue must exceed this times the largest.
  double degeneracy_floor = 1e-12;

  const PointMatrixMap &inverse_mass_function() const { return inverse_mass_; }

private:
  int dim_;
  double j0_;
  PointMatrixMap inverse_mass_;
};

using PiSymbolField = std::function<Rank3(const RVector &)>;

//! Π^λ_{μν} = ½ M^{λκ}(∂_ν M_{μκ} + ∂_μ M_{κν} − ∂_κ M_{μν}) at Q.
Rank3 compute_pi(const MassMetricField &metric, const RVector &q);
PiSymbolField pi_field(const MassMetricField &metric);

//! Π̄ at Q̄(Q) under the chart, from Π at Q.
Rank3 transform_pi(const CoordinateChart &chart, const PiSymbolField &pi, const RVector &q);

//! Inverse mass tensor expressed in the barred coordinates of `chart`.
MassMetricField pullback_metric(const CoordinateChart &chart, const MassMetricField &metric);

double volume_weight(const MassMetricField &metric, const RVector &q);

//! w^{-1} ∂_μ (w M^{μν}) at Q, the first-order coefficient of the divergence-form
//! kinetic operator (w the volume weight).
RVector divergence_coefficient(const MassMetricField &metric, const RVector &q);

//! Metric quantities sampled at every node of a grid.
struct MetricOnGrid {
  Grid grid;
  std::vector<RMatrix> inverse_mass;
  RVector volume_weight;
  std::vector<Rank3> pi;
  std::vector<RVector> divergence;

  static MetricOnGrid sample(const MassMetricField &metric, const Grid &grid);
  RVector inverse_mass_component(int mu, int nu) const;
};

//! ∫ f √𝓜 J₀ dQ with the quadrature of `quadrature_weights`.
cplx integrate(const ScalarField &f, const MassMetricField &metric);

} // namespace efgeo
