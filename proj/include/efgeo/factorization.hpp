#pragma once

#include <string>
#include <vector>

#include "efgeo/finite_difference.hpp"
#include "efgeo/full_solver.hpp"

namespace efgeo {

enum class Convention { ChiRealPositive, ReferenceOverlap };

std::string to_string(Convention c);
Convention convention_from_string(const std::string &s);

struct FactorizeOptions {
  Convention convention = Convention::ChiRealPositive;
  //! Reference electronic vector for ReferenceOverlap.
  CVector reference;
  //! Nodes with |χ|² below eps_node · max|χ|² are masked.
  double eps_node = 1e-12;
  //! Smallest admissible |⟨v_ref|Φ⟩| for ReferenceOverlap.
  double overlap_floor = 1e-6;
};

//! Ψ = χ Φ with ⟨Φ|Φ⟩ = 1 node-wise.
struct Factorization {
  ScalarField chi;
  ElectronicField phi;
  std::vector<bool> mask;
  //! Inner-product weight per node (cell measure times √𝓜 J₀).
  RVector weight;

  std::size_t masked_count() const;
  double masked_fraction() const;
  FullState reconstruct() const;
  //! ∫ √𝓜 J₀ |χ|².
  double chi_norm_squared() const;
};

//! Throws NormalizationError for an unnormalized or zero Ψ and DomainError
//! when every node is masked.
Factorization factorize(const FullState &psi, const RVector &weight, const FactorizeOptions &opt = {});

//! χ -> e^{-iλ} χ, Φ -> e^{iλ} Φ.
Factorization gauge_transform(const Factorization &fact, const ScalarField &lambda);

//! Phase field Θ with Φ = e^{iΘ} Φ_c, where Φ_c is obtained by parallel
//! transport of Φ from node 0, axis by axis.
//!
//! Link phases arg⟨Φ(a)|Φ(b)⟩ are accumulated along grid lines; on periodic
//! axes the line holonomy, taken in [-π/2, 3π/2), is spread evenly over the
//! links; the remaining multiple of 2π stays in Θ, which is meaningful modulo
//! 2π only. A gauge change λ shifts Θ by λ - λ(node 0) as long as no link
//! phase crosses ±π.
class CanonicalGauge {
public:
  explicit CanonicalGauge(const ElectronicField &phi);

  const RVector &theta() const { return theta_; }
  //! Φ_c = e^{-iΘ} Φ.
  const ElectronicField &phi() const { return phi_c_; }
  //! Total link phase along every periodic line, by axis.
  const std::vector<RVector> &holonomy() const { return holonomy_; }

  CVector phase() const;

private:
  RVector theta_;
  ElectronicField phi_c_;
  std::vector<RVector> holonomy_;
};

struct VectorPotential {
  CovectorField a;
  //! Largest |Im(-i⟨Φ|∂Φ⟩)| seen during the evaluation.
  double imaginary_residue = 0.0;
};

//! A_μ = -i⟨Φ|∂_μΦ⟩, evaluated as -i⟨Φ_c|∂_μΦ_c⟩ + ∂_μΘ (wrapped phase
//! differences) so that a gauge change shifts A by exactly the
//! finite-difference gradient of λ.
VectorPotential compute_vector_potential(const ElectronicField &phi, const FiniteDifference &fd);

//! A_0 = -i⟨Φ(t)|(Φ(t+dt) - Φ(t-dt))/(2dt)⟩.
ScalarField compute_scalar_potential(const ElectronicField &before, const ElectronicField &now,
                                     const ElectronicField &after, double dt);

//! arg exp(i ∮ A_μ dQ^μ) in (-π, π], trapezoidal along a closed loop of
//! neighbouring nodes (first node repeated at the end).
double geometric_phase(const CovectorField &a, const std::vector<std::size_t> &loop);

//! Closed loop along one periodic axis through `start`.
std::vector<std::size_t> axis_loop(const Grid &grid, int axis, std::size_t start = 0);

} // namespace efgeo
