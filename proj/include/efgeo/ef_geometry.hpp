#pragma once

#include <vector>

#include "efgeo/factorization.hpp"
#include "efgeo/geometry.hpp"

namespace efgeo {

//! D_μ f = ∂_μ f + sign·i·A_μ f for a nuclear scalar (rank-1 result).
TensorField covariant_derivative(const ScalarField &f, const CovectorField &a, int sign,
                                 const FiniteDifference &fd, EdgeRule rule = EdgeRule::Dirichlet);
//! Same for an electronic field, one field per μ.
std::vector<ElectronicField> covariant_derivative(const ElectronicField &f, const CovectorField &a, int sign,
                                                  const FiniteDifference &fd,
                                                  EdgeRule rule = EdgeRule::OneSided);

//! ∇_μ∇_ν f = D_μD_ν f − Π^λ_{μν} D_λ f (rank-2 result).
TensorField second_covariant_derivative(const ScalarField &f, const CovectorField &a, const MetricOnGrid &metric,
                                        int sign, const FiniteDifference &fd,
                                        EdgeRule rule = EdgeRule::Dirichlet);

//! Covariant derivatives of a factorized state.
//!
//! Everything is evaluated in the parallel-transport gauge of CanonicalGauge
//! and rotated back, so a gauge change multiplies every output by the exact
//! phase e^{±iλ}. D_μΦ is the projected form (1 − |Φ⟩⟨Φ|)∂_μΦ.
class CovariantCalculus {
public:
  CovariantCalculus(const Factorization &fact, const FiniteDifference &fd);

  int dim() const { return dim_; }
  const Grid &grid() const { return grid_; }
  const ElectronicField &phi() const { return phi_; }
  const CVector &chi() const { return chi_; }
  //! A_μ in the gauge of the factorization.
  const CovectorField &a() const { return a_; }
  double imaginary_residue() const { return imaginary_residue_; }

  const ElectronicField &d_phi(int mu) const { return d_phi_[static_cast<std::size_t>(mu)]; }
  const ElectronicField &dd_phi(int mu, int nu) const { return dd_phi_[static_cast<std::size_t>(mu * dim_ + nu)]; }
  //! (P_μ − A_μ)Φ with P = −i∂.
  const ElectronicField &p_minus_a_phi(int mu) const { return pa_phi_[static_cast<std::size_t>(mu)]; }
  const CVector &d_chi(int mu) const { return d_chi_[static_cast<std::size_t>(mu)]; }
  const CVector &dd_chi(int mu, int nu) const { return dd_chi_[static_cast<std::size_t>(mu * dim_ + nu)]; }

private:
  int dim_;
  Grid grid_;
  ElectronicField phi_;
  CVector chi_;
  CovectorField a_;
  double imaginary_residue_ = 0.0;
  std::vector<ElectronicField> d_phi_, dd_phi_, pa_phi_;
  std::vector<CVector> d_chi_, dd_chi_;
};

//! h_{λκ} = ⟨D_λΦ|D_κΦ⟩.
TensorField quantum_geometric_tensor(const CovariantCalculus &calc);
//! g_{μν} = Re⟨(P_μ − A_μ)Φ|(P_ν − A_ν)Φ⟩.
TensorField quantum_metric(const CovariantCalculus &calc);
//! ½ M^{μν} g_{μν}.
ScalarField epsilon_geo(const MetricOnGrid &metric, const TensorField &g);
//! ⟨Φ|Ĥ^BO|Φ⟩; the largest discarded imaginary part goes to `imaginary`.
ScalarField epsilon_bo(const ElectronicField &phi, const std::vector<CMatrix> &h_bo, double *imaginary = nullptr);

//! Υ_{λμν} = ⟨D_λΦ|D_μD_νΦ⟩, symmetrized in (μ, ν); the raw asymmetry goes to `asymmetry`.
TensorField quantum_christoffel_first(const CovariantCalculus &calc, double *asymmetry = nullptr);

//! Γ_{λμν} = ½(∂_μ g_{λν} + ∂_ν g_{λμ} − ∂_λ g_{μν}) from a finite-differenced metric.
TensorField christoffel_from_metric(const TensorField &g, const FiniteDifference &fd);

struct ChristoffelSecond {
  TensorField upsilon;
  //! Nodes where h is singular or ill-conditioned; Υ^λ is zero there.
  std::vector<bool> flagged;
  //! max |h_{λκ} Υ^κ_{μν} − Υ_{λμν}| over unflagged nodes.
  double reconstruction_error = 0.0;
};

//! Υ^λ_{μν} = h^{λκ} Υ_{κμν}. A node is flagged when cond(h) exceeds
//! `cond_cap` or its smallest eigenvalue is below max_grid λ_max / cond_cap or
//! below `floor`.
ChristoffelSecond quantum_christoffel_second(const TensorField &h, const TensorField &upsilon_first,
                                             double cond_cap = 1e8, double floor = 1e-14);

struct Frame {
  std::vector<CVector> vectors;
  //! Number of D_μΦ directions independent of Φ and of each other.
  int rank = 0;
};

//! Orthonormal basis of the complement of span{Φ, D_μΦ} at one node.
//! D_μΦ directions with residual norm below `rank_tolerance` are dropped.
Frame tangent_frame(const CVector &phi, const std::vector<CVector> &d_phi, double rank_tolerance = 1e-8);
std::vector<Frame> tangent_frames(const CovariantCalculus &calc, double rank_tolerance = 1e-8);

//! D_μD_νΦ = Φ p_{μν} + D_λΦ Υ^λ_{μν} + e_a Ω^a_{μν} at every node.
struct Decomposition {
  std::vector<CMatrix> phi_part;             // [node](μ,ν)
  std::vector<std::vector<CMatrix>> upsilon; // [node][λ](μ,ν)
  std::vector<std::vector<CMatrix>> omega;   // [node][a](μ,ν)
  RVector residual;                          // max over (μ,ν) of the reconstruction error norm
};

Decomposition decompose_second_derivative(const CovariantCalculus &calc, const std::vector<Frame> &frames);

struct EfGeometryOptions {
  double cond_cap = 1e8;
  //! Absolute eigenvalue floor of h.
  double h_floor = 1e-14;
  double rank_tolerance = 1e-8;
};

struct EfGeometry {
  TensorField h, g;
  TensorField upsilon_first, upsilon_second;
  TensorField gamma, c_tensor;
  ScalarField eps_bo, eps_geo;
  std::vector<Frame> frame;
  Decomposition decomposition;
  //! Ill-conditioned h or masked node.
  std::vector<bool> flagged;
  double upsilon_asymmetry = 0.0;
  double eps_bo_imaginary = 0.0;
  double reconstruction_error = 0.0;
};

EfGeometry compute_ef_geometry(const Factorization &fact, const CovariantCalculus &calc,
                               const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                               const EfGeometryOptions &opt = {});

} // namespace efgeo
