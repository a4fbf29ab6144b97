#include "efgeo/csv.hpp"

#include <charconv>
#include <sstream>

#include "efgeo/error.hpp"

namespace efgeo {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string &path) : out_(path, std::ios::binary) {
  if (!out_) throw DomainError("cannot write " + path);
}

void CsvWriter::row(const std::vector<std::string> &fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    const std::string &f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out_ << f;
    } else {
      out_ << '"';
      for (char c : f) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    }
  }
  out_ << "\r\n";
}

int CsvTable::column(const std::string &name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(field);
        records.push_back(rec);
      }
      rec.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    rec.push_back(field);
    records.push_back(rec);
  }
  if (records.empty()) throw SchemaError(path + ": empty CSV");
  CsvTable t;
  t.header = records.front();
  t.rows.assign(records.begin() + 1, records.end());
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (t.rows[r].size() != t.header.size())
      throw SchemaError(path + ": line " + std::to_string(r + 2) + " has " + std::to_string(t.rows[r].size()) +
                        " fields, header has " + std::to_string(t.header.size()));
  return t;
}

namespace {

std::vector<std::string> node_prefix(const Grid &grid, std::size_t node) {
  std::vector<std::string> row{std::to_string(node)};
  for (double x : grid.coordinates(node)) row.push_back(format_double(x));
  return row;
}

std::vector<std::string> coordinate_header(const Grid &grid) {
  std::vector<std::string> h{"node"};
  for (int mu = 0; mu < grid.dim(); ++mu) h.push_back("q" + std::to_string(mu + 1));
  return h;
}

double parse_double(const std::string &s, const std::string &where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw SchemaError(where + ": not a number: " + s);
  return v;
}

} // namespace

void write_scalar_csv(const std::string &path, const ScalarField &f) {
  CsvWriter w(path);
  auto h = coordinate_header(f.grid);
  h.insert(h.end(), {"re", "im"});
  w.row(h);
  for (std::size_t node = 0; node < f.grid.size(); ++node) {
    auto row = node_prefix(f.grid, node);
    const cplx v = f.values[static_cast<Eigen::Index>(node)];
    row.push_back(format_double(v.real()));
    row.push_back(format_double(v.imag()));
    w.row(row);
  }
}

void write_electronic_csv(const std::string &path, const ElectronicField &f) {
  CsvWriter w(path);
  auto h = coordinate_header(f.grid);
  for (int l = 0; l < f.levels; ++l) {
    h.push_back("re_" + std::to_string(l));
    h.push_back("im_" + std::to_string(l));
  }
  w.row(h);
  for (std::size_t node = 0; node < f.grid.size(); ++node) {
    auto row = node_prefix(f.grid, node);
    for (int l = 0; l < f.levels; ++l) {
      const cplx v = f.values(static_cast<Eigen::Index>(node), l);
      row.push_back(format_double(v.real()));
      row.push_back(format_double(v.imag()));
    }
    w.row(row);
  }
}

void write_tensor_csv(const std::string &path, const TensorField &t, const std::vector<std::string> &index_names) {
  if (static_cast<int>(index_names.size()) != t.rank()) throw ShapeMismatchError("one name per tensor index expected");
  CsvWriter w(path);
  std::vector<std::string> h{"node"};
  h.insert(h.end(), index_names.begin(), index_names.end());
  h.insert(h.end(), {"re", "im"});
  w.row(h);
  for (std::size_t node = 0; node < t.grid().size(); ++node)
    for (std::size_t c = 0; c < t.components(); ++c) {
      std::vector<std::string> row{std::to_string(node)};
      for (int i : t.unflatten(c)) row.push_back(std::to_string(i));
      const cplx v = t.component(c)[static_cast<Eigen::Index>(node)];
      row.push_back(format_double(v.real()));
      row.push_back(format_double(v.imag()));
      w.row(row);
    }
}

void write_mask_csv(const std::string &path, const Grid &grid, const std::vector<bool> &mask) {
  CsvWriter w(path);
  auto h = coordinate_header(grid);
  h.push_back("masked");
  w.row(h);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    auto row = node_prefix(grid, node);
    row.push_back(mask[node] ? "1" : "0");
    w.row(row);
  }
}

ElectronicField read_electronic_csv(const std::string &path, const Grid &grid) {
  const CsvTable t = read_csv(path);
  int levels = 0;
  while (t.column("re_" + std::to_string(levels)) >= 0) ++levels;
  if (levels == 0) throw SchemaError(path + ": no re_0 column");
  if (t.rows.size() != grid.size())
    throw SchemaError(path + ": " + std::to_string(t.rows.size()) + " rows for a grid of " +
                      std::to_string(grid.size()) + " nodes");
  const int node_col = t.column("node");
  ElectronicField f(grid, levels);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ": line " + std::to_string(r + 2);
    std::size_t node = r;
    if (node_col >= 0) node = static_cast<std::size_t>(parse_double(t.rows[r][node_col], where));
    if (node >= grid.size()) throw SchemaError(where + ": node index out of range");
    for (int l = 0; l < levels; ++l) {
      const double re = parse_double(t.rows[r][t.column("re_" + std::to_string(l))], where);
      const int ic = t.column("im_" + std::to_string(l));
      const double im = ic >= 0 ? parse_double(t.rows[r][ic], where) : 0.0;
      f.values(static_cast<Eigen::Index>(node), l) = cplx(re, im);
    }
  }
  return f;
}

} // namespace efgeo
