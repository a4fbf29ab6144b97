#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace efgeo {

enum class Boundary { Periodic, Clamped };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string &s);

struct Axis {
  int n = 0;
  double lo = 0.0;
  double hi = 1.0;
  Boundary boundary = Boundary::Clamped;

  //! Periodic axes exclude the node at hi.
  double spacing() const {
    return boundary == Boundary::Periodic ? (hi - lo) / n : (hi - lo) / (n - 1);
  }
  double coordinate(int i) const { return lo + i * spacing(); }

  bool operator==(const Axis &) const = default;
};

//! Tensor-product grid over d-dimensional configuration space.
//! Flat node index runs with the last axis fastest.
class Grid {
public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes);

  int dim() const { return static_cast<int>(axes_.size()); }
  const Axis &axis(int mu) const { return axes_.at(mu); }
  const std::vector<Axis> &axes() const { return axes_; }
  std::size_t size() const { return size_; }
  double spacing(int mu) const { return axes_[mu].spacing(); }
  //! Product of spacings; the volume of one cell.
  double cell_volume() const;

  std::size_t stride(int mu) const { return strides_[mu]; }
  int index_along(std::size_t node, int mu) const {
    return static_cast<int>((node / strides_[mu]) % axes_[mu].n);
  }
  std::vector<int> multi_index(std::size_t node) const;
  std::size_t flat_index(const std::vector<int> &idx) const;
  std::vector<double> coordinates(std::size_t node) const;

  bool operator==(const Grid &o) const { return axes_ == o.axes_; }

  nlohmann::json to_json() const;
  static Grid from_json(const nlohmann::json &j);

private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

} // namespace efgeo
