#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "efgeo/finite_difference.hpp"
#include "efgeo/geometry.hpp"
#include "efgeo/numerics.hpp"

namespace efgeo {

//! Electronic Hamiltonian at clamped nuclei, Q -> Hermitian n x n matrix.
class BoHamiltonianField {
public:
  BoHamiltonianField() = default;
  BoHamiltonianField(int levels, std::function<CMatrix(const RVector &)> h);

  int levels() const { return levels_; }
  //! Throws NotHermitianError when the matrix deviates from Hermitian by more than 1e-12.
  CMatrix operator()(const RVector &q) const;
  std::vector<CMatrix> sample(const Grid &grid) const;

private:
  int levels_ = 0;
  std::function<CMatrix(const RVector &)> h_;
};

//! Ψ on the product of grid nodes and electronic levels; row = node.
struct FullState {
  Grid grid;
  int levels = 0;
  CMatrix psi;
  std::optional<double> energy;

  FullState() = default;
  FullState(Grid g, int n) : grid(std::move(g)), levels(n), psi(CMatrix::Zero(static_cast<Eigen::Index>(grid.size()), n)) {}

  //! Node-major flattening (node * levels + level).
  CVector flat() const;
  static FullState from_flat(const Grid &g, int levels, const CVector &v);
  //! Σ_nodes weight Σ_levels |Ψ|².
  double norm_squared(const RVector &weight) const;
};

//! Discretized Podolsky kinetic operator on nuclear scalar fields.
//!
//! Diagonal metric components enter through a node-to-midpoint staggered
//! derivative with the coefficient w M^{μμ} sampled at cell midpoints; mixed
//! components use central derivatives at the nodes. Clamped axes carry
//! Dirichlet walls.
struct KineticOperator {
  Grid grid;
  RMatrix matrix;
  //! Inner-product weight per node: cell measure times √𝓜 J₀.
  RVector weight;
  //! Relative asymmetry of W T before symmetrization.
  double asymmetry = 0.0;

  //! W^{1/2} T W^{-1/2}, symmetrized.
  RMatrix symmetric() const;
  CVector apply(const CVector &chi) const { return matrix.cast<cplx>() * chi; }
};

KineticOperator build_kinetic_operator(const Grid &grid, const MassMetricField &metric, int fd_order = 4);

//! Ĥ = T̂_n ⊗ 1 + Ĥ^BO in the symmetric representation W^{1/2} Ĥ W^{-1/2}.
struct FullHamiltonian {
  Grid grid;
  int levels = 0;
  RVector weight;
  CMatrix matrix;
  double kinetic_asymmetry = 0.0;

  CVector to_symmetric(const FullState &s) const;
  FullState from_symmetric(const CVector &u) const;
  //! Ĥ acting on node values (not symmetrized).
  CVector apply(const FullState &s) const;
  double expectation(const FullState &s) const;
};

FullHamiltonian build_full_hamiltonian(const KineticOperator &kinetic, const BoHamiltonianField &h_bo);

//! Lowest k eigenstates, normalized in the weighted inner product.
std::vector<FullState> solve_eigenstates(const FullHamiltonian &h, int k);

struct Trajectory {
  std::vector<double> times;
  std::vector<FullState> states;
};

//! Cayley stepping; keeps the initial state and every `stride`-th step.
//! Stable for any dt; accuracy needs dt ‖H‖ well below 1.
Trajectory propagate(const FullHamiltonian &h, const FullState &psi0, double dt, int steps, int stride = 1);

//! ½ ∫ √𝓜 J₀ M^{μν} ⟨∂_μΨ|∂_νΨ⟩ with central differences.
double kinetic_energy_expectation(const FullState &psi, const MassMetricField &metric, int fd_order = 4);

} // namespace efgeo
