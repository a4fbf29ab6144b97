#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "efgeo/full_solver.hpp"
#include "efgeo/geometry_spec.hpp"

namespace efgeo {

//! Grid, metric and electronic Hamiltonian of one model system.
struct Model {
  std::string name;
  std::string description;
  Grid grid;
  int levels = 1;
  std::map<std::string, double> parameters;
  MassMetricField metric = MassMetricField::flat({1.0});
  BoHamiltonianField h_bo;
  //! Chart shipped with the model, if any.
  std::optional<CoordinateChart> chart;
  //! Known values (energies, phases) used as checks.
  nlohmann::json reference = nlohmann::json::object();
  //! Source JSON; null for derived models.
  nlohmann::json spec;
};

//! Validates and instantiates a model description.
//! Throws SchemaError (with the offending field path) or NotHermitianError.
Model model_from_json(const nlohmann::json &j);
Model load_model(const std::string &path);

std::vector<std::string> builtin_names();
nlohmann::json builtin_spec(const std::string &name);
Model builtin(const std::string &name);

//! Same physics in the barred coordinates of `chart`, sampled on `grid`.
Model transform_model(const Model &model, const CoordinateChart &chart, const Grid &grid);

//! Grid with every axis carried through the chart (axis-separable charts only).
Grid mapped_grid(const Grid &grid, const CoordinateChart &chart);

} // namespace efgeo
