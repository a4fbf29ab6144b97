#include "efgeo/grid.hpp"

#include "efgeo/error.hpp"

namespace efgeo {

std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "clamped"; }

Boundary boundary_from_string(const std::string &s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "clamped") return Boundary::Clamped;
  throw SchemaError("boundary must be \"periodic\" or \"clamped\", got \"" + s + "\"");
}

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw DomainError("grid needs at least one axis");
  for (std::size_t mu = 0; mu < axes_.size(); ++mu) {
    const Axis &a = axes_[mu];
    if (a.n < 5)
      throw DomainError("axis " + std::to_string(mu) + " has " + std::to_string(a.n) +
                        " points; at least 5 are needed for the finite-difference stencils");
    if (!(a.hi > a.lo)) throw DomainError("axis " + std::to_string(mu) + " has hi <= lo");
  }
  strides_.assign(axes_.size(), 1);
  for (int mu = dim() - 2; mu >= 0; --mu) strides_[mu] = strides_[mu + 1] * axes_[mu + 1].n;
  size_ = strides_[0] * axes_[0].n;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (const auto &a : axes_) v *= a.spacing();
  return v;
}

std::vector<int> Grid::multi_index(std::size_t node) const {
  std::vector<int> idx(axes_.size());
  for (int mu = 0; mu < dim(); ++mu) idx[mu] = index_along(node, mu);
  return idx;
}

std::size_t Grid::flat_index(const std::vector<int> &idx) const {
  std::size_t k = 0;
  for (int mu = 0; mu < dim(); ++mu) k += strides_[mu] * static_cast<std::size_t>(idx[mu]);
  return k;
}

std::vector<double> Grid::coordinates(std::size_t node) const {
  std::vector<double> x(axes_.size());
  for (int mu = 0; mu < dim(); ++mu) x[mu] = axes_[mu].coordinate(index_along(node, mu));
  return x;
}

nlohmann::json Grid::to_json() const {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto &a : axes_)
    axes.push_back({{"n", a.n}, {"lo", a.lo}, {"hi", a.hi}, {"boundary", to_string(a.boundary)}});
  return {{"axes", axes}};
}

Grid Grid::from_json(const nlohmann::json &j) {
  if (!j.is_object() || !j.contains("axes") || !j["axes"].is_array())
    throw SchemaError("grid: expected an object with an \"axes\" array");
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < j["axes"].size(); ++k) {
    const auto &a = j["axes"][k];
    const std::string where = "grid.axes[" + std::to_string(k) + "]";
    for (const char *key : {"n", "lo", "hi", "boundary"})
      if (!a.contains(key)) throw SchemaError(where + ": missing field \"" + key + "\"");
    if (!a["n"].is_number_integer()) throw SchemaError(where + ".n: expected an integer");
    if (!a["lo"].is_number() || !a["hi"].is_number())
      throw SchemaError(where + ": lo/hi must be numbers");
    axes.push_back({a["n"].get<int>(), a["lo"].get<double>(), a["hi"].get<double>(),
                    boundary_from_string(a["boundary"].get<std::string>())});
  }
  return Grid(std::move(axes));
}

} // namespace efgeo
