#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "efgeo/fields.hpp"

namespace efgeo {

//! How clamped axes are closed off.
//!
//! OneSided keeps the stencil order with shifted stencils (geometric fields);
//! Dirichlet treats values beyond the last node as zero (wavefunctions).
enum class EdgeRule { OneSided, Dirichlet };

//! Fornberg weights: row m holds the weights of the m-th derivative at x0.
RMatrix fornberg_weights(double x0, std::span<const double> x, int max_derivative);

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

//! Central finite differences of configurable order on a tensor-product grid.
class FiniteDifference {
public:
  explicit FiniteDifference(Grid grid, int order = 4);

  int order() const { return order_; }
  const Grid &grid() const { return grid_; }

  //! First (derivative == 1) or second (derivative == 2) derivative along one axis.
  CVector apply(const CVector &f, int axis, int derivative, EdgeRule rule) const;

  //! First derivative of a phase field known modulo 2π: every stencil uses
  //! differences θ(j) − θ(i) wrapped into (−π, π].
  RVector phase_derivative(const RVector &theta, int axis) const;

  CVector derivative(const CVector &f, int axis, EdgeRule rule = EdgeRule::OneSided) const {
    return apply(f, axis, 1, rule);
  }
  //! ∂_mu ∂_nu f: compact stencil on the diagonal, nested first derivatives off it.
  CVector second_derivative(const CVector &f, int mu, int nu,
                            EdgeRule rule = EdgeRule::OneSided) const;

  SparseMatrix matrix(int axis, int derivative, EdgeRule rule) const;

  //! Node-to-midpoint derivative along `axis` (Dirichlet closure on clamped axes).
  struct Staggered {
    SparseMatrix op;
    //! For each midpoint row: the node with axis index 0 on the same grid
    //! line, and the signed axis index j of the midpoint j + 1/2.
    std::vector<std::size_t> line_base;
    std::vector<int> anchor_index;
  };
  Staggered staggered(int axis) const;

private:
  struct Tap {
    int offset; // index along the axis, before periodic wrapping
    double weight;
  };
  using Row = std::vector<Tap>;
  const std::vector<Row> &rows(int axis, int derivative, EdgeRule rule) const;
  std::vector<Row> build_rows(int axis, int derivative, EdgeRule rule) const;

  Grid grid_;
  int order_;
  // [axis][derivative-1][rule]
  std::vector<std::array<std::array<std::vector<Row>, 2>, 2>> table_;
};

} // namespace efgeo
