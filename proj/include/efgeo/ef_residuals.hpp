#pragma once

#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "efgeo/ef_geometry.hpp"

namespace efgeo {

//! Eigenstate with its energy; time dependence e^{-iEt} removed before factorizing.
struct Stationary {
  double energy = 0.0;
};

//! Time-dependent data at one instant.
struct Dynamic {
  ScalarField a0;
  //! ∂_t χ and ∂_t Φ, e.g. from central differences of neighbouring snapshots.
  CVector chi_t;
  ElectronicField phi_t;
};

using TimeMode = std::variant<Stationary, Dynamic>;

//! Form of the second-derivative term of the electronic equation.
enum class ElectronicForm {
  //! −½ w⁻¹∂_μ(w M^{μν}) D_νΦ − ½ M^{μν} D_μD_νΦ
  Divergence,
  //! −½ M^{μν} ∇_μ∇_νΦ = −½ M^{μν}(D_μD_νΦ − Π^λ_{μν} D_λΦ)
  Nabla,
};

//! −½M^{μν}∇_μ∇_νχ + (ε_BO + ε_geo)χ − Eχ (stationary) or − iD_tχ (dynamic).
ScalarField nuclear_residual(const CovariantCalculus &calc, const MetricOnGrid &metric, const ScalarField &eps_bo,
                             const ScalarField &eps_geo, const TimeMode &mode);

//! −½M^{μν}∇_μ∇_νΦ − M^{μν}(D_μχ/χ)D_νΦ + (Ĥ^BO − ε_BO − ε_geo)Φ, minus iD_tΦ in
//! dynamic mode. Masked nodes are left at zero.
ElectronicField electronic_residual(const CovariantCalculus &calc, const std::vector<bool> &mask,
                                    const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                                    const ScalarField &eps_bo, const ScalarField &eps_geo, const TimeMode &mode,
                                    ElectronicForm form = ElectronicForm::Nabla);

//! sqrt(Σ w |f|²) over unmasked nodes.
double weighted_norm(const CVector &f, const RVector &weight, const std::vector<bool> &mask);
//! sqrt(Σ w |χ|² ‖R‖²) over unmasked nodes.
double density_weighted_norm(const ElectronicField &r, const Factorization &fact, const std::vector<bool> &mask);

//! Density-weighted norm of ⟨Φ|R⟩.
double projection_identity_check(const Factorization &fact, const ElectronicField &residual);

struct ProjectedResiduals {
  //! [κ]: RHS − LHS of the D_κΦ projection.
  std::vector<CVector> tangent;
  //! [κ]: ⟨D_κΦ|R⟩ computed directly.
  std::vector<CVector> tangent_direct;
  //! [node][b]: RHS − LHS of the e_b projection.
  std::vector<CVector> normal;
  std::vector<CVector> normal_direct;
  //! max |⟨e_b|e_a⟩ − δ_ab|.
  double gram_defect = 0.0;
  //! Largest node-wise mismatch of projected against direct values, unflagged nodes.
  double tangent_mismatch = 0.0;
  double normal_mismatch = 0.0;
  double tangent_norm = 0.0;
  double normal_norm = 0.0;
  //! max | ‖R‖² − |⟨Φ|R⟩|² − r†h⁻¹r − Σ_b|⟨e_b|R⟩|² | over unflagged nodes.
  double completeness_defect = 0.0;
};

ProjectedResiduals projected_electronic_equations(const Factorization &fact, const CovariantCalculus &calc,
                                                  const EfGeometry &geo, const MetricOnGrid &metric,
                                                  const std::vector<CMatrix> &h_bo, const TimeMode &mode,
                                                  const ElectronicField *residual = nullptr);

struct ResidualReport {
  ScalarField nuclear;
  ElectronicField electronic;
  ProjectedResiduals projected;
  double nuclear_norm = 0.0;
  double electronic_norm = 0.0;
  double phi_projection = 0.0;
  //! max node-wise |R_divergence − R_nabla| over unmasked nodes.
  double form_mismatch = 0.0;
  double masked_fraction = 0.0;

  nlohmann::json to_json() const;
};

ResidualReport compute_residuals(const Factorization &fact, const CovariantCalculus &calc, const EfGeometry &geo,
                                 const MetricOnGrid &metric, const std::vector<CMatrix> &h_bo,
                                 const TimeMode &mode);

} // namespace efgeo
