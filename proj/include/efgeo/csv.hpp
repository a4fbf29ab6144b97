#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "efgeo/fields.hpp"

namespace efgeo {

//! Shortest decimal string that reads back to the same double.
std::string format_double(double x);

//! RFC 4180 writer: fields with commas, quotes or line breaks are quoted.
class CsvWriter {
public:
  explicit CsvWriter(const std::string &path);
  void row(const std::vector<std::string> &fields);

private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string &name) const;
};

CsvTable read_csv(const std::string &path);

//! node, q1..qd, re, im
void write_scalar_csv(const std::string &path, const ScalarField &f);
//! node, q1..qd, re_0, im_0, re_1, im_1, ...
void write_electronic_csv(const std::string &path, const ElectronicField &f);
//! node, one index column per tensor slot, re, im
void write_tensor_csv(const std::string &path, const TensorField &t, const std::vector<std::string> &index_names);
void write_mask_csv(const std::string &path, const Grid &grid, const std::vector<bool> &mask);

//! Reads the layout of write_electronic_csv back onto `grid`.
ElectronicField read_electronic_csv(const std::string &path, const Grid &grid);

} // namespace efgeo
