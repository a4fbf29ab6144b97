#include "efgeo/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "efgeo/error.hpp"

namespace efgeo {

struct Expression::Node {
  enum class Kind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Constant;
  double value = 0.0;
  int variable = 0;
  double (*function)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(std::span<const double> q) const {
    switch (kind) {
    case Kind::Constant: return value;
    case Kind::Variable: return q[variable];
    case Kind::Negate: return -lhs->eval(q);
    case Kind::Add: return lhs->eval(q) + rhs->eval(q);
    case Kind::Sub: return lhs->eval(q) - rhs->eval(q);
    case Kind::Mul: return lhs->eval(q) * rhs->eval(q);
    case Kind::Div: return lhs->eval(q) / rhs->eval(q);
    case Kind::Pow: {
      const double base = lhs->eval(q);
      const double expo = rhs->eval(q);
      // integer exponents go through repeated multiplication so that
      // negative bases stay well defined
      if (expo == std::round(expo) && std::abs(expo) <= 64) {
        const int n = static_cast<int>(expo);
        double r = 1.0;
        for (int i = 0; i < std::abs(n); ++i) r *= base;
        return n >= 0 ? r : 1.0 / r;
      }
      return std::pow(base, expo);
    }
    case Kind::Call: return function(lhs->eval(q));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

double fn_sin(double x) { return std::sin(x); }
double fn_cos(double x) { return std::cos(x); }
double fn_tan(double x) { return std::tan(x); }
double fn_exp(double x) { return std::exp(x); }
double fn_log(double x) { return std::log(x); }
double fn_sqrt(double x) { return std::sqrt(x); }
double fn_cbrt(double x) { return std::cbrt(x); }
double fn_abs(double x) { return std::abs(x); }

const std::map<std::string, double (*)(double)> &functions() {
  static const std::map<std::string, double (*)(double)> table{
      {"sin", fn_sin},   {"cos", fn_cos},   {"tan", fn_tan},
      {"exp", fn_exp},   {"log", fn_log},   {"sqrt", fn_sqrt},
      {"cbrt", fn_cbrt}, {"abs", fn_abs}};
  return table;
}

class Parser {
public:
  Parser(const std::string &src, int dim, const std::map<std::string, double> &params)
      : src_(src), dim_(dim), params_(params) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string &what) const {
    throw SchemaError("expression \"" + src_ + "\" column " + std::to_string(pos_ + 1) +
                      ": " + what);
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make(Kind::Add, n, term());
      else if (accept('-')) n = make(Kind::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Kind::Mul, n, unary());
      else if (accept('/')) n = make(Kind::Div, n, unary());
      else return n;
    }
  }

  // unary minus binds looser than ^ so that -q1^2 == -(q1^2)
  NodePtr unary() {
    if (accept('-')) return make(Kind::Negate, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Kind::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    const char c = src_[pos_];
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char *begin = src_.c_str() + pos_;
    char *end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Constant;
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name = src_.substr(start, pos_ - start);

    if (auto f = functions().find(name); f != functions().end()) {
      if (!accept('(')) fail("expected '(' after " + name);
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Call;
      n->function = f->second;
      n->lhs = arg;
      return n;
    }
    if (name.size() > 1 && name[0] == 'q' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(name.substr(1));
      if (idx < 1 || idx > dim_)
        fail("variable " + name + " outside q1..q" + std::to_string(dim_));
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Variable;
      n->variable = idx - 1;
      return n;
    }
    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->value = std::numbers::pi;
      return n;
    }
    if (auto p = params_.find(name); p != params_.end()) {
      auto n = std::make_shared<Expression::Node>();
      n->value = p->second;
      return n;
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  const std::string &src_;
  int dim_;
  const std::map<std::string, double> &params_;
  std::size_t pos_ = 0;
};

} // namespace

Expression Expression::compile(const std::string &source, int dim,
                               const std::map<std::string, double> &parameters) {
  Expression e;
  e.source_ = source;
  e.root_ = Parser(source, dim, parameters).parse();
  return e;
}

double Expression::operator()(std::span<const double> q) const {
  if (!root_) throw SchemaError("evaluating an empty expression");
  return root_->eval(q);
}

} // namespace efgeo
