#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace efgeo {

//! Compiled closed-form real expression over q1..qd and named parameters.
//!
//! Grammar: sums and products of numeric literals, variables, parenthesized
//! groups, unary minus, right-associative `^`, and calls to
//! sin cos tan exp log sqrt cbrt abs.
class Expression {
public:
  Expression() = default;

  //! Parses `source`; `dim` fixes the admissible variables q1..q<dim>.
  //! Throws SchemaError with a column diagnostic on malformed input.
  static Expression compile(const std::string &source, int dim,
                            const std::map<std::string, double> &parameters = {});

  double operator()(std::span<const double> q) const;

  const std::string &source() const { return source_; }

  struct Node;

private:
  std::string source_;
  std::shared_ptr<const Node> root_;
};

//! Row-major matrix of expressions, e.g. a metric or Hamiltonian table.
using ExpressionMatrix = std::vector<std::vector<Expression>>;

} // namespace efgeo
