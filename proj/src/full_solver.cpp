#include "efgeo/full_solver.hpp"

#include "efgeo/error.hpp"

namespace efgeo {

namespace {

RVector node_point(const Grid &g, std::size_t node) {
  const auto c = g.coordinates(node);
  return Eigen::Map<const RVector>(c.data(), static_cast<Eigen::Index>(c.size()));
}

} // namespace

BoHamiltonianField::BoHamiltonianField(int levels, std::function<CMatrix(const RVector &)> h)
    : levels_(levels), h_(std::move(h)) {
  if (levels < 1) throw DomainError("electronic level count must be positive");
}

CMatrix BoHamiltonianField::operator()(const RVector &q) const {
  CMatrix m = h_(q);
  if (m.rows() != levels_ || m.cols() != levels_) throw ShapeMismatchError("h_bo has wrong shape");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NotHermitianError("h_bo not Hermitian at a grid point");
  return m;
}

std::vector<CMatrix> BoHamiltonianField::sample(const Grid &grid) const {
  std::vector<CMatrix> out(grid.size());
  for (std::size_t node = 0; node < grid.size(); ++node) out[node] = (*this)(node_point(grid, node));
  return out;
}

CVector FullState::flat() const {
  CVector v(psi.size());
  for (Eigen::Index i = 0; i < psi.rows(); ++i)
    for (Eigen::Index l = 0; l < psi.cols(); ++l) v[i * psi.cols() + l] = psi(i, l);
  return v;
}

FullState FullState::from_flat(const Grid &g, int levels, const CVector &v) {
  FullState s(g, levels);
  if (v.size() != s.psi.size()) throw ShapeMismatchError("state vector does not match grid x levels");
  for (Eigen::Index i = 0; i < s.psi.rows(); ++i)
    for (Eigen::Index l = 0; l < levels; ++l) s.psi(i, l) = v[i * levels + l];
  return s;
}

double FullState::norm_squared(const RVector &weight) const {
  if (weight.size() != psi.rows()) throw ShapeMismatchError("weight does not match the state");
  return (weight.array() * psi.rowwise().squaredNorm().array()).sum();
}

RMatrix KineticOperator::symmetric() const {
  const RVector s = weight.cwiseSqrt();
  const RMatrix t = s.asDiagonal() * matrix * s.cwiseInverse().asDiagonal();
  return 0.5 * (t + t.transpose());
}

KineticOperator build_kinetic_operator(const Grid &grid, const MassMetricField &metric, int fd_order) {
  if (metric.dim() != grid.dim()) throw ShapeMismatchError("metric and grid dimensions differ");
  const FiniteDifference fd(grid, fd_order);
  const double cell = wavefunction_weights(grid)[0];
  const auto n = static_cast<Eigen::Index>(grid.size());

  KineticOperator k;
  k.grid = grid;
  k.weight.resize(n);
  for (std::size_t node = 0; node < grid.size(); ++node)
    k.weight[static_cast<Eigen::Index>(node)] = cell * metric.volume_weight(node_point(grid, node));

  // W T accumulated as a symmetric form
  RMatrix wt = RMatrix::Zero(n, n);
  for (int mu = 0; mu < grid.dim(); ++mu) {
    const auto st = fd.staggered(mu);
    const Axis &a = grid.axis(mu);
    RVector coef(st.op.rows());
    for (Eigen::Index r = 0; r < st.op.rows(); ++r) {
      RVector q = node_point(grid, st.line_base[static_cast<std::size_t>(r)]);
      q[mu] = a.lo + (st.anchor_index[static_cast<std::size_t>(r)] + 0.5) * a.spacing();
      coef[r] = cell * metric.volume_weight(q) * metric.inverse_mass(q)(mu, mu);
    }
    const SparseMatrix form = st.op.transpose() * coef.asDiagonal() * st.op;
    wt += 0.5 * RMatrix(form);
  }
  for (int mu = 0; mu < grid.dim(); ++mu)
    for (int nu = 0; nu < grid.dim(); ++nu) {
      if (mu == nu) continue;
      const SparseMatrix dmu = fd.matrix(mu, 1, EdgeRule::Dirichlet);
      const SparseMatrix dnu = fd.matrix(nu, 1, EdgeRule::Dirichlet);
      RVector coef(n);
      for (std::size_t node = 0; node < grid.size(); ++node) {
        const RVector q = node_point(grid, node);
        coef[static_cast<Eigen::Index>(node)] = cell * metric.volume_weight(q) * metric.inverse_mass(q)(mu, nu);
      }
      const SparseMatrix form = dmu.transpose() * coef.asDiagonal() * dnu;
      wt += 0.5 * RMatrix(form);
    }
  const double norm = wt.norm();
  k.asymmetry = norm > 0.0 ? (wt - wt.transpose()).norm() / norm : 0.0;
  k.matrix = k.weight.cwiseInverse().asDiagonal() * wt;
  return k;
}

CVector FullHamiltonian::to_symmetric(const FullState &s) const {
  CVector v = s.flat();
  for (Eigen::Index i = 0; i < weight.size(); ++i)
    v.segment(i * levels, levels) *= std::sqrt(weight[i]);
  return v;
}

FullState FullHamiltonian::from_symmetric(const CVector &u) const {
  CVector v = u;
  for (Eigen::Index i = 0; i < weight.size(); ++i)
    v.segment(i * levels, levels) /= std::sqrt(weight[i]);
  return FullState::from_flat(grid, levels, v);
}

CVector FullHamiltonian::apply(const FullState &s) const {
  return from_symmetric(matrix * to_symmetric(s)).flat();
}

double FullHamiltonian::expectation(const FullState &s) const {
  const CVector u = to_symmetric(s);
  return (u.adjoint() * matrix * u)(0, 0).real() / u.squaredNorm();
}

FullHamiltonian build_full_hamiltonian(const KineticOperator &kinetic, const BoHamiltonianField &h_bo) {
  const int nl = h_bo.levels();
  const auto nn = static_cast<Eigen::Index>(kinetic.grid.size());
  FullHamiltonian h;
  h.grid = kinetic.grid;
  h.levels = nl;
  h.weight = kinetic.weight;
  h.kinetic_asymmetry = kinetic.asymmetry;
  const RMatrix t = kinetic.symmetric();
  h.matrix = CMatrix::Zero(nn * nl, nn * nl);
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j) {
      if (t(i, j) == 0.0) continue;
      for (int l = 0; l < nl; ++l) h.matrix(i * nl + l, j * nl + l) = t(i, j);
    }
  const auto blocks = h_bo.sample(kinetic.grid);
  for (Eigen::Index i = 0; i < nn; ++i) h.matrix.block(i * nl, i * nl, nl, nl) += blocks[static_cast<std::size_t>(i)];
  return h;
}

std::vector<FullState> solve_eigenstates(const FullHamiltonian &h, int k) {
  if (k < 1) throw DomainError("number of states must be positive");
  std::vector<FullState> out;
  for (const auto &pair : hermitian_eigensolve(h.matrix, k)) {
    FullState s = h.from_symmetric(pair.vector);
    s.psi /= std::sqrt(s.norm_squared(h.weight));
    s.energy = pair.value;
    out.push_back(std::move(s));
  }
  return out;
}

Trajectory propagate(const FullHamiltonian &h, const FullState &psi0, double dt, int steps, int stride) {
  if (steps < 0) throw DomainError("step count must be non-negative");
  if (stride < 1) throw DomainError("snapshot stride must be positive");
  const CayleyStepper stepper(h.matrix, dt);
  Trajectory tr;
  CVector u = h.to_symmetric(psi0);
  tr.times.push_back(0.0);
  tr.states.push_back(psi0);
  for (int s = 1; s <= steps; ++s) {
    u = stepper.step(u);
    if (s % stride == 0) {
      tr.times.push_back(s * dt);
      tr.states.push_back(h.from_symmetric(u));
    }
  }
  return tr;
}

double kinetic_energy_expectation(const FullState &psi, const MassMetricField &metric, int fd_order) {
  const Grid &grid = psi.grid;
  if (metric.dim() != grid.dim()) throw ShapeMismatchError("metric and state grids differ");
  const FiniteDifference fd(grid, fd_order);
  const RVector cell = wavefunction_weights(grid);
  std::vector<CMatrix> grad; // [mu] nodes x levels
  for (int mu = 0; mu < grid.dim(); ++mu) {
    CMatrix g(psi.psi.rows(), psi.levels);
    for (int l = 0; l < psi.levels; ++l) g.col(l) = fd.apply(psi.psi.col(l), mu, 1, EdgeRule::Dirichlet);
    grad.push_back(std::move(g));
  }
  double total = 0.0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const RVector q = node_point(grid, node);
    const RMatrix minv = metric.inverse_mass(q);
    const auto i = static_cast<Eigen::Index>(node);
    double acc = 0.0;
    for (int mu = 0; mu < grid.dim(); ++mu)
      for (int nu = 0; nu < grid.dim(); ++nu)
        acc += minv(mu, nu) * grad[mu].row(i).dot(grad[nu].row(i)).real();
    total += cell[i] * metric.volume_weight(q) * acc;
  }
  return 0.5 * total;
}

} // namespace efgeo
