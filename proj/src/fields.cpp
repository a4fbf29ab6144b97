#include "efgeo/fields.hpp"

#include "efgeo/error.hpp"

namespace efgeo {

TensorField::TensorField(const Grid &g, int rank, bool is_real)
    : grid_(g), rank_(rank), real_(is_real) {
  std::size_t n = 1;
  for (int r = 0; r < rank; ++r) n *= static_cast<std::size_t>(g.dim());
  comps_.assign(n, CVector::Zero(static_cast<Eigen::Index>(g.size())));
}

std::size_t TensorField::flat(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != rank_)
    throw ShapeMismatchError("tensor of rank " + std::to_string(rank_) + " indexed with " +
                             std::to_string(idx.size()) + " indices");
  std::size_t k = 0;
  for (int i : idx) k = k * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(i);
  return k;
}

std::vector<int> TensorField::unflatten(std::size_t flat_index) const {
  std::vector<int> idx(rank_);
  for (int r = rank_ - 1; r >= 0; --r) {
    idx[r] = static_cast<int>(flat_index % static_cast<std::size_t>(dim()));
    flat_index /= static_cast<std::size_t>(dim());
  }
  return idx;
}

double TensorField::max_abs_difference(const TensorField &a, const TensorField &b) {
  if (a.rank_ != b.rank_ || !(a.grid_ == b.grid_))
    throw ShapeMismatchError("tensor fields differ in rank or grid");
  double m = 0.0;
  for (std::size_t c = 0; c < a.comps_.size(); ++c)
    m = std::max(m, (a.comps_[c] - b.comps_[c]).cwiseAbs().maxCoeff());
  return m;
}

double TensorField::max_abs() const {
  double m = 0.0;
  for (const auto &c : comps_) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

double ElectronicField::normalization_defect() const {
  return (values.rowwise().squaredNorm().array() - 1.0).abs().maxCoeff();
}

} // namespace efgeo
