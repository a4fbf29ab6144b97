#pragma once

#include <complex>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "efgeo/grid.hpp"

namespace efgeo {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

//! Complex (or real-flagged) scalar sampled at grid nodes.
struct ScalarField {
  Grid grid;
  CVector values;
  bool real = false;

  ScalarField() = default;
  ScalarField(Grid g, CVector v, bool is_real = false)
      : grid(std::move(g)), values(std::move(v)), real(is_real) {}
  static ScalarField zeros(const Grid &g, bool is_real = false) {
    return {g, CVector::Zero(static_cast<Eigen::Index>(g.size())), is_real};
  }

  //! Largest |Im| of a real-flagged field; zero when the flag holds.
  double imaginary_residue() const { return values.imag().cwiseAbs().maxCoeff(); }
};

//! Rank-r tensor with d^r components, each a node-indexed vector.
//! Component index is row-major in the tensor indices.
class TensorField {
public:
  TensorField() = default;
  TensorField(const Grid &g, int rank, bool is_real = false);

  const Grid &grid() const { return grid_; }
  int rank() const { return rank_; }
  int dim() const { return grid_.dim(); }
  bool real() const { return real_; }
  std::size_t components() const { return comps_.size(); }

  std::size_t flat(std::initializer_list<int> idx) const;
  CVector &component(std::size_t flat_index) { return comps_[flat_index]; }
  const CVector &component(std::size_t flat_index) const { return comps_[flat_index]; }
  CVector &operator[](std::initializer_list<int> idx) { return comps_[flat(idx)]; }
  const CVector &operator[](std::initializer_list<int> idx) const { return comps_[flat(idx)]; }

  //! Tensor indices of a flat component index.
  std::vector<int> unflatten(std::size_t flat_index) const;

  //! Max node-wise |a - b| over all components.
  static double max_abs_difference(const TensorField &a, const TensorField &b);
  double max_abs() const;

private:
  Grid grid_;
  int rank_ = 0;
  bool real_ = false;
  std::vector<CVector> comps_;
};

using CovectorField = TensorField;

//! Node-indexed n-level electronic vectors; row k holds the vector at node k.
struct ElectronicField {
  Grid grid;
  int levels = 0;
  CMatrix values;
  //! When set, every node carries a unit vector.
  bool conditional = false;

  ElectronicField() = default;
  ElectronicField(Grid g, int n, bool is_conditional = false)
      : grid(std::move(g)), levels(n),
        values(CMatrix::Zero(static_cast<Eigen::Index>(grid.size()), n)),
        conditional(is_conditional) {}

  CVector at(std::size_t node) const { return values.row(static_cast<Eigen::Index>(node)).transpose(); }
  void set(std::size_t node, const CVector &v) {
    values.row(static_cast<Eigen::Index>(node)) = v.transpose();
  }
  //! Max over nodes of | <v|v> - 1 |.
  double normalization_defect() const;
};

} // namespace efgeo
