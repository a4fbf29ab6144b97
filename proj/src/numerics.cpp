#include "efgeo/numerics.hpp"

#include <Eigen/Eigenvalues>

#include "efgeo/error.hpp"

namespace efgeo {

namespace {

RVector weights(const Grid &grid, bool dirichlet_extended) {
  RVector w(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t node = 0; node < grid.size(); ++node) {
    double v = 1.0;
    for (int mu = 0; mu < grid.dim(); ++mu) {
      const Axis &a = grid.axis(mu);
      double wi = a.spacing();
      if (!dirichlet_extended && a.boundary == Boundary::Clamped) {
        const int i = grid.index_along(node, mu);
        if (i == 0 || i == a.n - 1) wi *= 0.5;
      }
      v *= wi;
    }
    w[static_cast<Eigen::Index>(node)] = v;
  }
  return w;
}

} // namespace

RVector quadrature_weights(const Grid &grid) { return weights(grid, false); }

RVector wavefunction_weights(const Grid &grid) { return weights(grid, true); }

cplx integrate(const ScalarField &f, const RVector &volume_weight) {
  if (static_cast<std::size_t>(f.values.size()) != f.grid.size() ||
      volume_weight.size() != f.values.size())
    throw ShapeMismatchError("integrate: field and volume weight do not share the grid");
  const RVector q = quadrature_weights(f.grid);
  cplx acc = 0.0;
  for (Eigen::Index i = 0; i < f.values.size(); ++i) acc += q[i] * volume_weight[i] * f.values[i];
  return acc;
}

double hermitian_defect(const CMatrix &matrix) {
  const double norm = matrix.norm();
  if (norm == 0.0) return 0.0;
  return (matrix - matrix.adjoint()).norm() / norm;
}

void fix_phase(CVector &v) {
  if (v.size() == 0) return;
  const double top = v.cwiseAbs().maxCoeff();
  if (top == 0.0) return;
  // first entry within rounding of the maximum, so near-ties resolve stably
  Eigen::Index pick = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) >= top * (1.0 - 1e-10)) {
      pick = i;
      break;
    }
  v *= std::conj(v[pick]) / std::abs(v[pick]);
  v[pick] = std::abs(v[pick]);
}

std::vector<EigenPair> hermitian_eigensolve(const CMatrix &matrix, int k) {
  if (matrix.rows() != matrix.cols()) throw ShapeMismatchError("eigensolve: matrix not square");
  if (hermitian_defect(matrix) > 1e-10) throw NotHermitianError("eigensolve: matrix not Hermitian");
  const Eigen::Index n = matrix.rows();
  k = static_cast<int>(std::min<Eigen::Index>(k, n));

  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(k));
  if (matrix.imag().cwiseAbs().maxCoeff() == 0.0) {
    const RMatrix sym = 0.5 * (matrix.real() + matrix.real().transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> es(sym);
    if (es.info() != Eigen::Success) throw LinearSolveError("eigensolve did not converge");
    for (int i = 0; i < k; ++i) {
      CVector v = es.eigenvectors().col(i).cast<cplx>();
      fix_phase(v);
      out.push_back({es.eigenvalues()[i], v});
    }
  } else {
    const CMatrix sym = 0.5 * (matrix + matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sym);
    if (es.info() != Eigen::Success) throw LinearSolveError("eigensolve did not converge");
    for (int i = 0; i < k; ++i) {
      CVector v = es.eigenvectors().col(i);
      fix_phase(v);
      out.push_back({es.eigenvalues()[i], v});
    }
  }
  return out;
}

CayleyStepper::CayleyStepper(const CMatrix &hamiltonian, double dt) : dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const Eigen::Index n = hamiltonian.rows();
  const cplx half(0.0, 0.5 * dt);
  const CMatrix id = CMatrix::Identity(n, n);
  rhs_ = id - half * hamiltonian;
  lhs_.compute(id + half * hamiltonian);
  if (!(lhs_.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0))
    throw LinearSolveError("Cayley propagator: singular left-hand side");
}

CVector CayleyStepper::step(const CVector &psi) const {
  CVector out = lhs_.solve(rhs_ * psi);
  if (!out.allFinite()) throw LinearSolveError("Cayley propagator: non-finite solution");
  return out;
}

CVector unitary_step(const CMatrix &hamiltonian, const CVector &psi, double dt) {
  return CayleyStepper(hamiltonian, dt).step(psi);
}

} // namespace efgeo
