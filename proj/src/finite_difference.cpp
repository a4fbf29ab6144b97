#include "efgeo/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "efgeo/error.hpp"

namespace efgeo {

RMatrix fornberg_weights(double x0, std::span<const double> x, int max_derivative) {
  const int n = static_cast<int>(x.size());
  const int m = max_derivative;
  RMatrix c = RMatrix::Zero(n, m + 1);
  c(0, 0) = 1.0;
  double c1 = 1.0;
  double c4 = x[0] - x0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.transpose();
}

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

} // namespace

FiniteDifference::FiniteDifference(Grid grid, int order) : grid_(std::move(grid)), order_(order) {
  if (order != 2 && order != 4 && order != 6)
    throw DomainError("finite-difference order must be 2, 4 or 6");
  for (const auto &a : grid_.axes())
    if (a.n < order + 2)
      throw DomainError("axis with " + std::to_string(a.n) + " points is too short for order " +
                        std::to_string(order));
  table_.resize(static_cast<std::size_t>(grid_.dim()));
  for (int mu = 0; mu < grid_.dim(); ++mu)
    for (int d = 1; d <= 2; ++d)
      for (EdgeRule r : {EdgeRule::OneSided, EdgeRule::Dirichlet})
        table_[mu][d - 1][static_cast<int>(r)] = build_rows(mu, d, r);
}

std::vector<FiniteDifference::Row> FiniteDifference::build_rows(int axis, int derivative,
                                                                 EdgeRule rule) const {
  const Axis &a = grid_.axis(axis);
  const double h = a.spacing();
  const int r = order_ / 2;
  const int n = a.n;

  auto stencil = [&](int node, int first, int width) {
    std::vector<double> x(static_cast<std::size_t>(width));
    for (int k = 0; k < width; ++k) x[k] = (first + k - node) * h;
    const RMatrix w = fornberg_weights(0.0, x, derivative);
    Row row;
    for (int k = 0; k < width; ++k) row.push_back({first + k, w(derivative, k)});
    return row;
  };

  std::vector<Row> rows(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const bool interior = i - r >= 0 && i + r <= n - 1;
    if (a.boundary == Boundary::Periodic || interior) {
      rows[i] = stencil(i, i - r, 2 * r + 1);
    } else if (rule == EdgeRule::Dirichlet) {
      Row full = stencil(i, i - r, 2 * r + 1);
      for (const Tap &t : full)
        if (t.offset >= 0 && t.offset < n) rows[i].push_back(t);
    } else {
      const int width = derivative == 1 ? order_ + 1 : order_ + 2;
      const int first = std::clamp(i - width / 2, 0, n - width);
      rows[i] = stencil(i, first, width);
    }
  }
  return rows;
}

const std::vector<FiniteDifference::Row> &FiniteDifference::rows(int axis, int derivative,
                                                                 EdgeRule rule) const {
  if (axis < 0 || axis >= grid_.dim())
    throw DomainError("axis " + std::to_string(axis) + " out of range for a " +
                      std::to_string(grid_.dim()) + "-dimensional grid");
  if (derivative != 1 && derivative != 2) throw DomainError("only first and second derivatives");
  return table_[axis][derivative - 1][static_cast<int>(rule)];
}

CVector FiniteDifference::apply(const CVector &f, int axis, int derivative, EdgeRule rule) const {
  if (static_cast<std::size_t>(f.size()) != grid_.size())
    throw ShapeMismatchError("field size does not match the grid");
  const auto &tbl = rows(axis, derivative, rule);
  const Axis &a = grid_.axis(axis);
  const std::size_t stride = grid_.stride(axis);
  CVector out(f.size());
  for (std::size_t node = 0; node < grid_.size(); ++node) {
    const int i = grid_.index_along(node, axis);
    const std::size_t base = node - static_cast<std::size_t>(i) * stride;
    cplx acc = 0.0;
    for (const Tap &t : tbl[i])
      acc += t.weight * f[static_cast<Eigen::Index>(base + static_cast<std::size_t>(wrap(t.offset, a.n)) * stride)];
    out[static_cast<Eigen::Index>(node)] = acc;
  }
  return out;
}

RVector FiniteDifference::phase_derivative(const RVector &theta, int axis) const {
  if (static_cast<std::size_t>(theta.size()) != grid_.size())
    throw ShapeMismatchError("field size does not match the grid");
  const auto &tbl = rows(axis, 1, EdgeRule::OneSided);
  const Axis &a = grid_.axis(axis);
  const std::size_t stride = grid_.stride(axis);
  RVector out(theta.size());
  for (std::size_t node = 0; node < grid_.size(); ++node) {
    const int i = grid_.index_along(node, axis);
    const std::size_t base = node - static_cast<std::size_t>(i) * stride;
    const double here = theta[static_cast<Eigen::Index>(node)];
    double acc = 0.0;
    for (const Tap &t : tbl[i]) {
      const double d = theta[static_cast<Eigen::Index>(base + static_cast<std::size_t>(wrap(t.offset, a.n)) * stride)] - here;
      acc += t.weight * std::remainder(d, 2.0 * std::numbers::pi);
    }
    out[static_cast<Eigen::Index>(node)] = acc;
  }
  return out;
}

CVector FiniteDifference::second_derivative(const CVector &f, int mu, int nu, EdgeRule rule) const {
  if (mu == nu) return apply(f, mu, 2, rule);
  return apply(apply(f, nu, 1, rule), mu, 1, rule);
}

SparseMatrix FiniteDifference::matrix(int axis, int derivative, EdgeRule rule) const {
  const auto &tbl = rows(axis, derivative, rule);
  const Axis &a = grid_.axis(axis);
  const std::size_t stride = grid_.stride(axis);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t node = 0; node < grid_.size(); ++node) {
    const int i = grid_.index_along(node, axis);
    const std::size_t base = node - static_cast<std::size_t>(i) * stride;
    for (const Tap &t : tbl[i])
      trips.emplace_back(static_cast<int>(node),
                         static_cast<int>(base + static_cast<std::size_t>(wrap(t.offset, a.n)) * stride),
                         t.weight);
  }
  const int n = static_cast<int>(grid_.size());
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

FiniteDifference::Staggered FiniteDifference::staggered(int axis) const {
  if (axis < 0 || axis >= grid_.dim()) throw DomainError("axis out of range");
  const Axis &a = grid_.axis(axis);
  const int n = a.n;
  const int r = order_ / 2;
  const double h = a.spacing();
  const std::size_t stride = grid_.stride(axis);

  // weights for the midpoint between offsets 0 and 1, using offsets 1-r..r
  std::vector<double> x(static_cast<std::size_t>(2 * r));
  for (int k = 0; k < 2 * r; ++k) x[k] = (1 - r + k) * h;
  const RMatrix w = fornberg_weights(0.5 * h, x, 1);

  const bool periodic = a.boundary == Boundary::Periodic;
  const int jlo = periodic ? 0 : -r;
  const int jhi = periodic ? n - 1 : n - 2 + r;

  Staggered s;
  std::vector<Eigen::Triplet<double>> trips;
  int row = 0;
  for (std::size_t base = 0; base < grid_.size(); ++base) {
    if (grid_.index_along(base, axis) != 0) continue;
    for (int j = jlo; j <= jhi; ++j, ++row) {
      s.line_base.push_back(base);
      s.anchor_index.push_back(j);
      for (int k = 0; k < 2 * r; ++k) {
        int idx = j + 1 - r + k;
        if (periodic) idx = wrap(idx, n);
        else if (idx < 0 || idx >= n) continue;
        trips.emplace_back(row, static_cast<int>(base + static_cast<std::size_t>(idx) * stride),
                           w(1, k));
      }
    }
  }
  s.op = SparseMatrix(row, static_cast<int>(grid_.size()));
  s.op.setFromTriplets(trips.begin(), trips.end());
  return s;
}

} // namespace efgeo
