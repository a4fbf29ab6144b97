#pragma once

#include <vector>

#include <Eigen/LU>

#include "efgeo/fields.hpp"

namespace efgeo {

//! Per-node quadrature weights: trapezoidal on clamped axes, rectangle rule
//! on periodic axes.
RVector quadrature_weights(const Grid &grid);

//! Per-node weights for wavefunction inner products. Clamped axes carry a
//! Dirichlet wall one spacing beyond the last node, so the trapezoidal rule
//! on the extended axis reduces to the rectangle rule on the nodes.
RVector wavefunction_weights(const Grid &grid);

//! Quadrature of f * volume_weight.
cplx integrate(const ScalarField &f, const RVector &volume_weight);

struct EigenPair {
  double value = 0.0;
  CVector vector;
};

//! Lowest k eigenpairs of a Hermitian matrix, ascending, orthonormal, with the
//! largest-magnitude entry of every eigenvector made real and positive.
std::vector<EigenPair> hermitian_eigensolve(const CMatrix &matrix, int k);

//! Relative asymmetry ||A - A^H|| / ||A||.
double hermitian_defect(const CMatrix &matrix);

//! Puts the largest-magnitude entry of v on the positive real axis.
void fix_phase(CVector &v);

//! Cayley propagator (1 + iH dt/2) psi(t+dt) = (1 - iH dt/2) psi(t).
class CayleyStepper {
public:
  CayleyStepper(const CMatrix &hamiltonian, double dt);
  CVector step(const CVector &psi) const;
  double dt() const { return dt_; }

private:
  double dt_;
  CMatrix rhs_;
  Eigen::PartialPivLU<CMatrix> lhs_;
};

CVector unitary_step(const CMatrix &hamiltonian, const CVector &psi, double dt);

} // namespace efgeo
