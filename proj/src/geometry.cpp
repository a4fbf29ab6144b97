#include "efgeo/geometry.hpp"

#include <Eigen/Eigenvalues>

#include "efgeo/error.hpp"
#include "efgeo/finite_difference.hpp"
#include "efgeo/numerics.hpp"

namespace efgeo {

double Rank3::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::abs(v));
  return m;
}

double Rank3::max_abs_difference(const Rank3 &x, const Rank3 &y) {
  if (x.dim != y.dim) throw ShapeMismatchError("rank-3 arrays of different dimension");
  double m = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) m = std::max(m, std::abs(x.data[i] - y.data[i]));
  return m;
}

// ---------------------------------------------------------------- charts

CoordinateChart::CoordinateChart(int dim, PointMap forward, PointMap inverse,
                                 PointMatrixMap jacobian, PointHessianMap hessian)
    : dim_(dim), forward_(std::move(forward)), inverse_(std::move(inverse)),
      jacobian_(std::move(jacobian)), hessian_(std::move(hessian)) {}

CoordinateChart CoordinateChart::identity(int dim) {
  return linear(RMatrix::Identity(dim, dim));
}

CoordinateChart CoordinateChart::linear(const RMatrix &t) {
  const int d = static_cast<int>(t.rows());
  if (t.rows() != t.cols()) throw ShapeMismatchError("linear chart needs a square matrix");
  Eigen::FullPivLU<RMatrix> lu(t);
  if (!lu.isInvertible()) throw ChartDegeneracyError("linear chart matrix is singular");
  const RMatrix tinv = lu.inverse();
  return CoordinateChart(
      d, [t](const RVector &q) -> RVector { return t * q; },
      [tinv](const RVector &q) -> RVector { return tinv * q; },
      [t](const RVector &) -> RMatrix { return t; },
      [d](const RVector &) { return std::vector<RMatrix>(static_cast<std::size_t>(d), RMatrix::Zero(d, d)); });
}

RMatrix CoordinateChart::jacobian(const RVector &q) const {
  RMatrix j = jacobian_(q);
  if (j.rows() != dim_ || j.cols() != dim_) throw ShapeMismatchError("chart jacobian has wrong shape");
  const double det = j.determinant();
  if (!(std::abs(det) > jacobian_floor))
    throw ChartDegeneracyError("chart jacobian singular (det = " + std::to_string(det) + ")");
  return j;
}

RMatrix CoordinateChart::inverse_jacobian(const RVector &q) const { return jacobian(q).inverse(); }

std::vector<RMatrix> CoordinateChart::inverse_hessian(const RVector &q) const {
  const RMatrix jinv = inverse_jacobian(q);
  const std::vector<RMatrix> h = hessian_(q);
  std::vector<RMatrix> out(static_cast<std::size_t>(dim_), RMatrix::Zero(dim_, dim_));
  // ∂²Q^ρ/∂Q̄^μ∂Q̄^ν = −(J⁻¹)^ρ_α H^α_{βγ} (J⁻¹)^β_μ (J⁻¹)^γ_ν
  for (int alpha = 0; alpha < dim_; ++alpha) {
    const RMatrix t = jinv.transpose() * h[alpha] * jinv; // (μ,ν)
    for (int rho = 0; rho < dim_; ++rho) out[rho] -= jinv(rho, alpha) * t;
  }
  return out;
}

CoordinateChart CoordinateChart::inverted() const {
  const CoordinateChart self = *this;
  CoordinateChart c(
      dim_, inverse_, forward_,
      [self](const RVector &qbar) -> RMatrix { return self.inverse_jacobian(self.inverse(qbar)); },
      [self](const RVector &qbar) { return self.inverse_hessian(self.inverse(qbar)); });
  c.jacobian_floor = jacobian_floor;
  return c;
}

// ---------------------------------------------------------------- metric

MassMetricField::MassMetricField(int dim, PointMatrixMap inverse_mass, double j0)
    : dim_(dim), j0_(j0), inverse_mass_(std::move(inverse_mass)) {
  if (dim < 1) throw DomainError("metric dimension must be positive");
  if (!(j0 > 0.0)) throw DomainError("J0 must be a positive constant");
}

MassMetricField MassMetricField::flat(const std::vector<double> &masses, double j0) {
  const int d = static_cast<int>(masses.size());
  RMatrix minv = RMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) minv(i, i) = 1.0 / masses[i];
  return MassMetricField(d, [minv](const RVector &) { return minv; }, j0);
}

RMatrix MassMetricField::inverse_mass(const RVector &q) const {
  RMatrix m = inverse_mass_(q);
  if (m.rows() != dim_ || m.cols() != dim_) throw ShapeMismatchError("inverse mass tensor has wrong shape");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * m.cwiseAbs().maxCoeff())
    throw MetricDegeneracyError("inverse mass tensor is not symmetric");
  Eigen::SelfAdjointEigenSolver<RMatrix> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > degeneracy_floor * hi))
    throw MetricDegeneracyError("inverse mass tensor not positive definite (eigenvalues " +
                                std::to_string(lo) + ", " + std::to_string(hi) + ")");
  return m;
}

RMatrix MassMetricField::mass(const RVector &q) const { return inverse_mass(q).inverse(); }

double MassMetricField::det_mass(const RVector &q) const { return 1.0 / inverse_mass(q).determinant(); }

double MassMetricField::volume_weight(const RVector &q) const {
  const double det = det_mass(q);
  if (!(det > 0.0)) throw MetricDegeneracyError("det M_{mu nu} <= 0");
  return std::sqrt(det) * j0_;
}

double volume_weight(const MassMetricField &metric, const RVector &q) { return metric.volume_weight(q); }

namespace {

//! Central-difference weights for the first derivative with unit step.
std::vector<double> central_weights(int order) {
  const int r = order / 2;
  std::vector<double> x(static_cast<std::size_t>(2 * r + 1));
  for (int k = -r; k <= r; ++k) x[static_cast<std::size_t>(k + r)] = k;
  const RMatrix w = fornberg_weights(0.0, x, 1);
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = w(1, static_cast<Eigen::Index>(k));
  return out;
}

template <class F>
RMatrix point_derivative(const F &f, const RVector &q, int axis, int order, double step) {
  const auto w = central_weights(order);
  const int r = order / 2;
  RVector qs = q;
  qs[axis] = q[axis] - r * step;
  RMatrix acc = f(qs) * w[0];
  for (int k = 1; k <= 2 * r; ++k) {
    qs[axis] = q[axis] + (k - r) * step;
    if (w[static_cast<std::size_t>(k)] != 0.0) acc += f(qs) * w[static_cast<std::size_t>(k)];
  }
  return acc / step;
}

} // namespace

Rank3 compute_pi(const MassMetricField &metric, const RVector &q) {
  const int d = metric.dim();
  const RMatrix minv = metric.inverse_mass(q);
  std::vector<RMatrix> dm; // dm[κ](μ,ν) = ∂_κ M_{μν}
  for (int k = 0; k < d; ++k)
    dm.push_back(point_derivative([&](const RVector &x) { return metric.mass(x); }, q, k,
                                  metric.fd_order, metric.fd_step));
  Rank3 pi(d);
  for (int lam = 0; lam < d; ++lam)
    for (int mu = 0; mu < d; ++mu)
      for (int nu = mu; nu < d; ++nu) {
        double s = 0.0;
        for (int kap = 0; kap < d; ++kap)
          s += minv(lam, kap) * (dm[nu](mu, kap) + dm[mu](kap, nu) - dm[kap](mu, nu));
        pi(lam, mu, nu) = 0.5 * s;
        pi(lam, nu, mu) = 0.5 * s;
      }
  return pi;
}

PiSymbolField pi_field(const MassMetricField &metric) {
  return [metric](const RVector &q) { return compute_pi(metric, q); };
}

Rank3 transform_pi(const CoordinateChart &chart, const PiSymbolField &pi, const RVector &q) {
  const int d = chart.dim();
  const RMatrix j = chart.jacobian(q);       // ∂Q̄^λ/∂Q^ρ
  const RMatrix jinv = j.inverse();          // ∂Q^σ/∂Q̄^μ
  const auto ihess = chart.inverse_hessian(q); // ∂²Q^ρ/∂Q̄^μ∂Q̄^ν
  const Rank3 p = pi(q);
  Rank3 out(d);
  for (int lam = 0; lam < d; ++lam)
    for (int mu = 0; mu < d; ++mu)
      for (int nu = 0; nu < d; ++nu) {
        double s = 0.0;
        for (int rho = 0; rho < d; ++rho) {
          double inner = ihess[rho](mu, nu);
          for (int sig = 0; sig < d; ++sig)
            for (int tau = 0; tau < d; ++tau) inner += p(rho, sig, tau) * jinv(sig, mu) * jinv(tau, nu);
          s += j(lam, rho) * inner;
        }
        out(lam, mu, nu) = s;
      }
  return out;
}

MassMetricField pullback_metric(const CoordinateChart &chart, const MassMetricField &metric) {
  if (chart.dim() != metric.dim()) throw ShapeMismatchError("chart and metric dimensions differ");
  MassMetricField out(
      metric.dim(),
      [chart, metric](const RVector &qbar) -> RMatrix {
        const RVector q = chart.inverse(qbar);
        const RMatrix j = chart.jacobian(q);
        return j * metric.inverse_mass(q) * j.transpose();
      },
      metric.j0());
  out.fd_order = metric.fd_order;
  out.fd_step = metric.fd_step;
  out.degeneracy_floor = metric.degeneracy_floor;
  return out;
}

RVector divergence_coefficient(const MassMetricField &metric, const RVector &q) {
  const int d = metric.dim();
  RVector out = RVector::Zero(d);
  const double w = metric.volume_weight(q);
  for (int mu = 0; mu < d; ++mu) {
    const RMatrix dwm = point_derivative(
        [&](const RVector &x) -> RMatrix { return metric.volume_weight(x) * metric.inverse_mass(x); },
        q, mu, metric.fd_order, metric.fd_step);
    out += dwm.row(mu).transpose();
  }
  return out / w;
}

MetricOnGrid MetricOnGrid::sample(const MassMetricField &metric, const Grid &grid) {
  if (metric.dim() != grid.dim()) throw ShapeMismatchError("metric and grid dimensions differ");
  MetricOnGrid m;
  m.grid = grid;
  const auto n = static_cast<Eigen::Index>(grid.size());
  m.volume_weight.resize(n);
  m.inverse_mass.resize(grid.size());
  m.pi.resize(grid.size());
  m.divergence.resize(grid.size());
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const auto c = grid.coordinates(node);
    const RVector q = Eigen::Map<const RVector>(c.data(), static_cast<Eigen::Index>(c.size()));
    m.inverse_mass[node] = metric.inverse_mass(q);
    m.volume_weight[static_cast<Eigen::Index>(node)] = metric.volume_weight(q);
    m.pi[node] = compute_pi(metric, q);
    m.divergence[node] = divergence_coefficient(metric, q);
  }
  return m;
}

RVector MetricOnGrid::inverse_mass_component(int mu, int nu) const {
  RVector v(static_cast<Eigen::Index>(inverse_mass.size()));
  for (std::size_t i = 0; i < inverse_mass.size(); ++i) v[static_cast<Eigen::Index>(i)] = inverse_mass[i](mu, nu);
  return v;
}

cplx integrate(const ScalarField &f, const MassMetricField &metric) {
  RVector w(static_cast<Eigen::Index>(f.grid.size()));
  for (std::size_t node = 0; node < f.grid.size(); ++node) {
    const auto c = f.grid.coordinates(node);
    w[static_cast<Eigen::Index>(node)] =
        metric.volume_weight(Eigen::Map<const RVector>(c.data(), static_cast<Eigen::Index>(c.size())));
  }
  return integrate(f, w);
}

} // namespace efgeo
