#include "efgeo/factorization.hpp"

#include <numbers>

#include "efgeo/error.hpp"

namespace efgeo {

std::string to_string(Convention c) {
  return c == Convention::ChiRealPositive ? "chi-real-positive" : "reference-overlap";
}

Convention convention_from_string(const std::string &s) {
  if (s == "chi-real-positive") return Convention::ChiRealPositive;
  if (s == "reference-overlap") return Convention::ReferenceOverlap;
  throw DomainError("unknown gauge convention \"" + s + "\"");
}

std::size_t Factorization::masked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

double Factorization::masked_fraction() const {
  return mask.empty() ? 0.0 : static_cast<double>(masked_count()) / static_cast<double>(mask.size());
}

FullState Factorization::reconstruct() const {
  FullState s(chi.grid, phi.levels);
  s.psi = chi.values.asDiagonal() * phi.values;
  return s;
}

double Factorization::chi_norm_squared() const {
  return (weight.array() * chi.values.cwiseAbs2().array()).sum();
}

Factorization factorize(const FullState &psi, const RVector &weight, const FactorizeOptions &opt) {
  const Grid &grid = psi.grid;
  const auto nn = static_cast<Eigen::Index>(grid.size());
  if (weight.size() != nn) throw ShapeMismatchError("weight does not match the state grid");
  const RVector density = psi.psi.rowwise().squaredNorm();
  const double top = density.maxCoeff();
  if (!(top > 0.0)) throw NormalizationError("factorize: Ψ vanishes identically");
  const double norm = (weight.array() * density.array()).sum();
  if (std::abs(norm - 1.0) > 1e-8)
    throw NormalizationError("factorize: Ψ not normalized (norm² = " + std::to_string(norm) + ")");
  if (opt.convention == Convention::ReferenceOverlap && opt.reference.size() != psi.levels)
    throw ShapeMismatchError("reference vector does not match the level count");

  Factorization f;
  f.weight = weight;
  f.chi = ScalarField::zeros(grid, opt.convention == Convention::ChiRealPositive);
  f.phi = ElectronicField(grid, psi.levels, true);
  f.mask.assign(grid.size(), false);
  for (Eigen::Index i = 0; i < nn; ++i) f.mask[static_cast<std::size_t>(i)] = density[i] < opt.eps_node * top;
  if (f.masked_count() == grid.size()) throw DomainError("factorize: every node is masked");

  CVector ref;
  if (opt.convention == Convention::ReferenceOverlap) ref = opt.reference.normalized();
  for (Eigen::Index i = 0; i < nn; ++i) {
    const double amp = std::sqrt(density[i]);
    cplx chi = amp;
    if (opt.convention == Convention::ReferenceOverlap) {
      const cplx ov = ref.dot(psi.psi.row(i).transpose());
      const bool masked = f.mask[static_cast<std::size_t>(i)];
      if (!masked && std::abs(ov) < opt.overlap_floor * amp)
        throw GaugeFixingError("reference overlap below " + std::to_string(opt.overlap_floor) + " at node " +
                               std::to_string(i));
      if (std::abs(ov) > 0.0) chi = amp * ov / std::abs(ov);
    }
    f.chi.values[i] = chi;
    if (!f.mask[static_cast<std::size_t>(i)]) f.phi.set(static_cast<std::size_t>(i), psi.psi.row(i).transpose() / chi);
  }

  // masked nodes copy the nearest unmasked node along the first axis
  std::size_t fallback = 0;
  while (f.mask[fallback]) ++fallback;
  const Axis &a0 = grid.axis(0);
  const std::size_t stride = grid.stride(0);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    if (!f.mask[node]) continue;
    const int i0 = grid.index_along(node, 0);
    std::size_t src = fallback;
    for (int k = 1; k < a0.n; ++k) {
      bool found = false;
      for (int j : {i0 - k, i0 + k}) {
        if (a0.boundary == Boundary::Periodic) j = ((j % a0.n) + a0.n) % a0.n;
        if (j < 0 || j >= a0.n) continue;
        const std::size_t cand = node + static_cast<std::size_t>(j) * stride - static_cast<std::size_t>(i0) * stride;
        if (!f.mask[cand]) {
          src = cand;
          found = true;
          break;
        }
      }
      if (found) break;
    }
    f.phi.set(node, f.phi.at(src));
  }
  return f;
}

Factorization gauge_transform(const Factorization &fact, const ScalarField &lambda) {
  if (!(lambda.grid == fact.chi.grid)) throw ShapeMismatchError("gauge function lives on another grid");
  Factorization out = fact;
  for (Eigen::Index i = 0; i < lambda.values.size(); ++i) {
    const cplx u = std::polar(1.0, lambda.values[i].real());
    out.chi.values[i] = std::conj(u) * fact.chi.values[i];
    out.phi.values.row(i) = u * fact.phi.values.row(i);
  }
  out.chi.real = false;
  return out;
}

CanonicalGauge::CanonicalGauge(const ElectronicField &phi) {
  const Grid &g = phi.grid;
  const int d = g.dim();
  theta_ = RVector::Zero(static_cast<Eigen::Index>(g.size()));
  holonomy_.resize(static_cast<std::size_t>(d));
  auto link = [&](std::size_t a, std::size_t b) {
    return std::arg(phi.values.row(static_cast<Eigen::Index>(a)).dot(phi.values.row(static_cast<Eigen::Index>(b))));
  };
  for (int mu = 0; mu < d; ++mu) {
    const Axis &ax = g.axis(mu);
    const std::size_t stride = g.stride(mu);
    std::vector<double> hol;
    for (std::size_t base = 0; base < g.size(); ++base) {
      // lines along mu starting on nodes already reached: index 0 on axes >= mu
      bool start = true;
      for (int nu = mu; nu < d; ++nu)
        if (g.index_along(base, nu) != 0) start = false;
      if (!start) continue;
      std::vector<double> th(static_cast<std::size_t>(ax.n));
      th[0] = theta_[static_cast<Eigen::Index>(base)];
      for (int k = 1; k < ax.n; ++k)
        th[k] = th[k - 1] + link(base + (k - 1) * stride, base + k * stride);
      if (ax.boundary == Boundary::Periodic) {
        double gamma = th[ax.n - 1] - th[0] + link(base + (ax.n - 1) * stride, base);
        // holonomy branch [-π/2, 3π/2)
        gamma -= 2.0 * std::numbers::pi * std::floor((gamma + 0.5 * std::numbers::pi) / (2.0 * std::numbers::pi));
        for (int k = 1; k < ax.n; ++k) th[k] -= gamma * k / ax.n;
        hol.push_back(gamma);
      }
      for (int k = 1; k < ax.n; ++k) theta_[static_cast<Eigen::Index>(base + k * stride)] = th[k];
    }
    holonomy_[mu] = Eigen::Map<const RVector>(hol.data(), static_cast<Eigen::Index>(hol.size()));
  }
  phi_c_ = phi;
  for (Eigen::Index i = 0; i < theta_.size(); ++i) phi_c_.values.row(i) *= std::polar(1.0, -theta_[i]);
}

CVector CanonicalGauge::phase() const {
  CVector p(theta_.size());
  for (Eigen::Index i = 0; i < theta_.size(); ++i) p[i] = std::polar(1.0, theta_[i]);
  return p;
}

VectorPotential compute_vector_potential(const ElectronicField &phi, const FiniteDifference &fd) {
  if (!(fd.grid() == phi.grid)) throw ShapeMismatchError("finite differences built for another grid");
  if (phi.normalization_defect() > 1e-10) throw NormalizationError("vector potential needs a normalized Φ");
  const CanonicalGauge cg(phi);
  const ElectronicField &pc = cg.phi();
  VectorPotential out;
  out.a = CovectorField(phi.grid, 1, true);
  for (int mu = 0; mu < phi.grid.dim(); ++mu) {
    CMatrix dphi(pc.values.rows(), pc.levels);
    for (int l = 0; l < pc.levels; ++l) dphi.col(l) = fd.apply(pc.values.col(l), mu, 1, EdgeRule::OneSided);
    const RVector dtheta = fd.phase_derivative(cg.theta(), mu);
    CVector &a = out.a[{mu}];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const cplx ac = cplx(0.0, -1.0) * pc.values.row(i).dot(dphi.row(i));
      out.imaginary_residue = std::max(out.imaginary_residue, std::abs(ac.imag()));
      a[i] = ac.real() + dtheta[i];
    }
  }
  return out;
}

ScalarField compute_scalar_potential(const ElectronicField &before, const ElectronicField &now,
                                     const ElectronicField &after, double dt) {
  if (!(before.grid == now.grid) || !(after.grid == now.grid) || before.levels != now.levels ||
      after.levels != now.levels)
    throw ShapeMismatchError("snapshots live on different grids");
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  ScalarField a0 = ScalarField::zeros(now.grid, true);
  const CMatrix dphi = (after.values - before.values) / (2.0 * dt);
  for (Eigen::Index i = 0; i < a0.values.size(); ++i)
    a0.values[i] = (cplx(0.0, -1.0) * now.values.row(i).dot(dphi.row(i))).real();
  return a0;
}

double geometric_phase(const CovectorField &a, const std::vector<std::size_t> &loop) {
  const Grid &g = a.grid();
  if (loop.size() < 3 || loop.front() != loop.back()) throw DomainError("geometric phase needs a closed loop");
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < loop.size(); ++k) {
    const auto p = g.multi_index(loop[k]);
    const auto q = g.multi_index(loop[k + 1]);
    int axis = -1;
    double step = 0.0;
    for (int mu = 0; mu < g.dim(); ++mu) {
      const int n = g.axis(mu).n;
      int diff = q[mu] - p[mu];
      if (g.axis(mu).boundary == Boundary::Periodic) {
        if (diff == n - 1) diff = -1;
        if (diff == 1 - n) diff = 1;
      }
      if (diff == 0) continue;
      if (axis >= 0 || std::abs(diff) != 1) throw DomainError("loop nodes are not grid neighbours");
      axis = mu;
      step = diff * g.spacing(mu);
    }
    if (axis < 0) throw DomainError("loop repeats a node");
    const CVector &comp = a[{axis}];
    integral += 0.5 * (comp[static_cast<Eigen::Index>(loop[k])].real() +
                       comp[static_cast<Eigen::Index>(loop[k + 1])].real()) * step;
  }
  double phase = std::arg(std::polar(1.0, integral));
  if (phase <= -std::numbers::pi) phase = std::numbers::pi;
  return phase;
}

std::vector<std::size_t> axis_loop(const Grid &grid, int axis, std::size_t start) {
  const Axis &a = grid.axis(axis);
  if (a.boundary != Boundary::Periodic) throw DomainError("axis loops need a periodic axis");
  const int i0 = grid.index_along(start, axis);
  const std::size_t base = start - static_cast<std::size_t>(i0) * grid.stride(axis);
  std::vector<std::size_t> loop;
  for (int k = 0; k <= a.n; ++k)
    loop.push_back(base + static_cast<std::size_t>((i0 + k) % a.n) * grid.stride(axis));
  return loop;
}

} // namespace efgeo
