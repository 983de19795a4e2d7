#include "goh/expr.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace goh {

namespace {

std::vector<Node> constant_nodes(double value) {
  Node n;
  n.op = Op::constant;
  n.value = value;
  return {n};
}

int precedence(const Node& n) {
  switch (n.op) {
    case Op::add:
    case Op::sub:
      return 1;
    case Op::mul:
    case Op::div:
      return 2;
    case Op::neg:
      return 3;
    case Op::pow:
      return 4;
    case Op::constant:
      return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    case Op::variable:
    case Op::abs:
      return 5;
  }
  return 5;
}

// ---------------------------------------------------------------------------
// Lexer / parser

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end };

struct Token {
  Tok kind = Tok::end;
  std::string_view text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      if (src_[pos_] == '\n') {
        ++line_;
        line_start_ = pos_ + 1;
      }
      ++pos_;
    }
    current_ = Token{};
    current_.line = line_;
    current_.column = static_cast<int>(pos_ - line_start_) + 1;
    if (pos_ >= src_.size()) {
      current_.kind = Tok::end;
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) {
        ++end;
      }
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t e = end + 1;
        if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
        if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
          while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) ++e;
          end = e;
        }
      }
      current_.kind = Tok::number;
      current_.text = src_.substr(pos_, end - pos_);
      const auto* first = src_.data() + pos_;
      const auto* last = src_.data() + end;
      auto [ptr, ec] = std::from_chars(first, last, current_.number);
      if (ec != std::errc() || ptr != last) {
        throw ParseError("malformed number '" + std::string(current_.text) + "'", current_.line,
                         current_.column);
      }
      pos_ = end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
        ++end;
      }
      current_.kind = Tok::ident;
      current_.text = src_.substr(pos_, end - pos_);
      pos_ = end;
      return;
    }
    current_.text = src_.substr(pos_, 1);
    switch (c) {
      case '+': current_.kind = Tok::plus; break;
      case '-': current_.kind = Tok::minus; break;
      case '*': current_.kind = Tok::star; break;
      case '/': current_.kind = Tok::slash; break;
      case '^': current_.kind = Tok::caret; break;
      case '(': current_.kind = Tok::lparen; break;
      case ')': current_.kind = Tok::rparen; break;
      case ',': current_.kind = Tok::comma; break;
      default:
        throw ParseError("unexpected character '" + std::string(1, c) + "'", current_.line,
                         current_.column);
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
  int line_ = 1;
  Token current_;
};

class Parser {
 public:
  Parser(std::string_view text, const Dims& dims, bool allow_identifiers)
      : lex_(text), dims_(dims), allow_identifiers_(allow_identifiers) {}

  std::vector<Node> run(int& root) {
    root = expr();
    if (lex_.peek().kind != Tok::end) {
      fail("unexpected '" + std::string(lex_.peek().text) + "'");
    }
    return std::move(nodes_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, lex_.peek().line, lex_.peek().column);
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs) {
    Node n;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    return push(n);
  }

  int expr() {
    int lhs = term();
    while (lex_.peek().kind == Tok::plus || lex_.peek().kind == Tok::minus) {
      const Op op = lex_.take().kind == Tok::plus ? Op::add : Op::sub;
      const int rhs = term();
      lhs = binary(op, lhs, rhs);
    }
    return lhs;
  }

  int term() {
    int lhs = unary();
    while (lex_.peek().kind == Tok::star || lex_.peek().kind == Tok::slash) {
      const Op op = lex_.take().kind == Tok::star ? Op::mul : Op::div;
      const int rhs = unary();
      lhs = binary(op, lhs, rhs);
    }
    return lhs;
  }

  int unary() {
    if (lex_.peek().kind == Tok::minus) {
      lex_.take();
      const int operand = unary();
      if (nodes_[operand].op == Op::constant) {
        nodes_[operand].value = -nodes_[operand].value;
        return operand;
      }
      Node n;
      n.op = Op::neg;
      n.lhs = operand;
      return push(n);
    }
    return factor();
  }

  int factor() {
    const int base_node = base();
    if (lex_.peek().kind != Tok::caret) return base_node;
    lex_.take();
    double sign = 1.0;
    if (lex_.peek().kind == Tok::minus) {
      lex_.take();
      sign = -1.0;
    }
    if (lex_.peek().kind != Tok::number) {
      if (lex_.peek().kind == Tok::end) fail("expected exponent");
      fail("non-constant exponent");
    }
    Node n;
    n.op = Op::pow;
    n.lhs = base_node;
    n.value = sign * lex_.take().number;
    return push(n);
  }

  int base() {
    const Token& tok = lex_.peek();
    switch (tok.kind) {
      case Tok::number: {
        Node n;
        n.op = Op::constant;
        n.value = lex_.take().number;
        return push(n);
      }
      case Tok::lparen: {
        lex_.take();
        const int inner = expr();
        expect(Tok::rparen, "')'");
        return inner;
      }
      case Tok::ident:
        return identifier();
      case Tok::end:
        fail("unexpected end of expression");
      default:
        fail("unexpected '" + std::string(tok.text) + "'");
    }
  }

  void expect(Tok kind, const std::string& what) {
    if (lex_.peek().kind != kind) fail("expected " + what);
    lex_.take();
  }

  int identifier() {
    const Token tok = lex_.peek();
    const std::string name(tok.text);
    if (name == "abs" || name == "min" || name == "max") {
      lex_.take();
      expect(Tok::lparen, "'('");
      const int a = expr();
      if (name == "abs") {
        expect(Tok::rparen, "')'");
        Node n;
        n.op = Op::abs;
        n.lhs = a;
        return push(n);
      }
      expect(Tok::comma, "','");
      const int b = expr();
      expect(Tok::rparen, "')'");
      return min_max(name == "max", a, b);
    }
    if (!allow_identifiers_) fail("identifier '" + name + "' in constant expression");
    VarRef v;
    if (!resolve(name, v)) {
      throw ParseError("unknown variable '" + name + "'", tok.line, tok.column);
    }
    lex_.take();
    Node n;
    n.op = Op::variable;
    n.var = v;
    return push(n);
  }

  bool resolve(const std::string& name, VarRef& v) const {
    if (name == "t") {
      v = {VarKind::t, 0};
      return true;
    }
    if (name == "s") {
      v = {VarKind::s, 0};
      return true;
    }
    if (name == "w0") {
      v = {VarKind::w0, 0};
      return true;
    }
    if (name.size() < 2) return false;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
    }
    if (name[1] == '0') return false;
    const int idx = std::stoi(name.substr(1));
    int limit = 0;
    switch (name[0]) {
      case 'x': v.kind = VarKind::x; limit = dims_.n; break;
      case 'u': v.kind = VarKind::u; limit = dims_.m; break;
      case 'w': v.kind = VarKind::w; limit = dims_.m; break;
      case 'a': v.kind = VarKind::a; limit = dims_.q; break;
      default: return false;
    }
    if (idx < 1 || idx > limit) return false;
    v.index = idx - 1;
    return true;
  }

  // Copies the subtree rooted at `root` to the end of the node array.
  int clone(int root) {
    Node n = nodes_[root];
    if (n.lhs >= 0) n.lhs = clone(n.lhs);
    if (n.rhs >= 0) n.rhs = clone(n.rhs);
    return push(n);
  }

  // min(a,b) = (a + b - |a - b|)/2, max(a,b) = (a + b + |a - b|)/2
  int min_max(bool is_max, int a, int b) {
    const int sum = binary(Op::add, a, b);
    const int ca = clone(a);
    const int cb = clone(b);
    const int diff = binary(Op::sub, ca, cb);
    Node absn;
    absn.op = Op::abs;
    absn.lhs = diff;
    const int kink = push(absn);
    const int num = binary(is_max ? Op::add : Op::sub, sum, kink);
    Node two;
    two.op = Op::constant;
    two.value = 2.0;
    const int den = push(two);
    return binary(Op::div, num, den);
  }

  Lexer lex_;
  Dims dims_;
  bool allow_identifiers_;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Printing

void print(std::span<const Node> nodes, int idx, int min_prec, std::string& out) {
  const Node& n = nodes[idx];
  const bool parens = precedence(n) < min_prec;
  if (parens) out += '(';
  switch (n.op) {
    case Op::constant:
      out += format_number(n.value);
      break;
    case Op::variable:
      out += to_string(n.var);
      break;
    case Op::add:
    case Op::sub:
      print(nodes, n.lhs, 1, out);
      out += n.op == Op::add ? " + " : " - ";
      print(nodes, n.rhs, 2, out);
      break;
    case Op::mul:
    case Op::div:
      print(nodes, n.lhs, 2, out);
      out += n.op == Op::mul ? " * " : " / ";
      print(nodes, n.rhs, 3, out);
      break;
    case Op::neg:
      out += '-';
      print(nodes, n.lhs, 3, out);
      break;
    case Op::pow:
      print(nodes, n.lhs, 5, out);
      out += '^';
      out += format_number(n.value);
      break;
    case Op::abs:
      out += "abs(";
      print(nodes, n.lhs, 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

bool same_tree(std::span<const Node> a, int ia, std::span<const Node> b, int ib) {
  const Node& x = a[ia];
  const Node& y = b[ib];
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::constant:
      return x.value == y.value;
    case Op::variable:
      return x.var == y.var;
    case Op::pow:
      return x.value == y.value && same_tree(a, x.lhs, b, y.lhs);
    case Op::neg:
    case Op::abs:
      return same_tree(a, x.lhs, b, y.lhs);
    default:
      return same_tree(a, x.lhs, b, y.lhs) && same_tree(a, x.rhs, b, y.rhs);
  }
}

double checked_pow(double base, double exponent) {
  const double r = std::pow(base, exponent);
  if (!std::isfinite(r)) throw EvalError("non-finite power");
  return r;
}

// Scratch buffers reused across evaluations on the same thread.
struct Scratch {
  std::vector<double> values;
  Eigen::MatrixXd grads;  // coords x nodes
};

thread_local Scratch scratch;

int coord_of(std::span<const VarRef> coords, const VarRef& v) {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i] == v) return static_cast<int>(i);
  }
  return -1;
}

// Forward-mode sweep; fills scratch.values and scratch.grads.
void forward(std::span<const Node> nodes, const EvalPoint& p, std::span<const VarRef> coords,
             std::span<const std::int8_t> forced, bool with_grad) {
  const auto count = nodes.size();
  const auto k = static_cast<Eigen::Index>(coords.size());
  auto& val = scratch.values;
  val.resize(count);
  if (with_grad) scratch.grads.resize(k, static_cast<Eigen::Index>(count));
  auto& g = scratch.grads;
  int ordinal = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Node& n = nodes[i];
    const auto col = static_cast<Eigen::Index>(i);
    switch (n.op) {
      case Op::constant:
        val[i] = n.value;
        if (with_grad) g.col(col).setZero();
        break;
      case Op::variable: {
        val[i] = p.get(n.var);
        if (with_grad) {
          g.col(col).setZero();
          const int c = coord_of(coords, n.var);
          if (c >= 0) g(c, col) = 1.0;
        }
        break;
      }
      case Op::add:
        val[i] = val[n.lhs] + val[n.rhs];
        if (with_grad) g.col(col) = g.col(n.lhs) + g.col(n.rhs);
        break;
      case Op::sub:
        val[i] = val[n.lhs] - val[n.rhs];
        if (with_grad) g.col(col) = g.col(n.lhs) - g.col(n.rhs);
        break;
      case Op::mul:
        val[i] = val[n.lhs] * val[n.rhs];
        if (with_grad) g.col(col) = val[n.rhs] * g.col(n.lhs) + val[n.lhs] * g.col(n.rhs);
        break;
      case Op::div: {
        const double den = val[n.rhs];
        if (den == 0.0) throw EvalError("division by zero");
        val[i] = val[n.lhs] / den;
        if (with_grad) g.col(col) = (g.col(n.lhs) - val[i] * g.col(n.rhs)) / den;
        break;
      }
      case Op::pow: {
        const double b = val[n.lhs];
        val[i] = checked_pow(b, n.value);
        if (with_grad) {
          if (n.value == 0.0 || g.col(n.lhs).isZero(0.0)) {
            g.col(col).setZero();
          } else {
            g.col(col) = n.value * checked_pow(b, n.value - 1.0) * g.col(n.lhs);
          }
        }
        break;
      }
      case Op::neg:
        val[i] = -val[n.lhs];
        if (with_grad) g.col(col) = -g.col(n.lhs);
        break;
      case Op::abs: {
        const double z = val[n.lhs];
        val[i] = std::abs(z);
        if (with_grad) {
          double sg = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
          if (ordinal < static_cast<int>(forced.size()) && forced[ordinal] != 0) sg = forced[ordinal];
          g.col(col) = sg * g.col(n.lhs);
        }
        ++ordinal;
        break;
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error("syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string to_string(const VarRef& v) {
  switch (v.kind) {
    case VarKind::t: return "t";
    case VarKind::s: return "s";
    case VarKind::w0: return "w0";
    case VarKind::x: return "x" + std::to_string(v.index + 1);
    case VarKind::u: return "u" + std::to_string(v.index + 1);
    case VarKind::a: return "a" + std::to_string(v.index + 1);
    case VarKind::w: return "w" + std::to_string(v.index + 1);
  }
  return "?";
}

double EvalPoint::get(const VarRef& v) const {
  auto pick = [&](const Eigen::VectorXd& vec) {
    if (v.index >= vec.size()) throw EvalError("unassigned variable " + to_string(v));
    return vec[v.index];
  };
  switch (v.kind) {
    case VarKind::t: return t;
    case VarKind::s: return s;
    case VarKind::w0: return w0;
    case VarKind::x: return pick(x);
    case VarKind::u: return pick(u);
    case VarKind::a: return pick(a);
    case VarKind::w: return pick(w);
  }
  return 0.0;
}

void EvalPoint::set(const VarRef& v, double value) {
  auto put = [&](Eigen::VectorXd& vec) {
    if (v.index >= vec.size()) {
      const auto old = vec.size();
      vec.conservativeResize(v.index + 1);
      vec.tail(vec.size() - old).setZero();
    }
    vec[v.index] = value;
  };
  switch (v.kind) {
    case VarKind::t: t = value; break;
    case VarKind::s: s = value; break;
    case VarKind::w0: w0 = value; break;
    case VarKind::x: put(x); break;
    case VarKind::u: put(u); break;
    case VarKind::a: put(a); break;
    case VarKind::w: put(w); break;
  }
}

Expr::Expr() : Expr(std::make_shared<const std::vector<Node>>(constant_nodes(0.0)), 0) {}

Expr::Expr(std::shared_ptr<const std::vector<Node>> nodes, int root)
    : nodes_(std::move(nodes)), root_(root) {
  for (const Node& n : *nodes_) {
    if (n.op == Op::abs) ++kink_count_;
  }
}

Expr Expr::parse(std::string_view text, const Dims& dims) {
  Parser parser(text, dims, true);
  int root = 0;
  auto nodes = parser.run(root);
  return Expr(std::make_shared<const std::vector<Node>>(std::move(nodes)), root);
}

Expr Expr::constant(double value) {
  return Expr(std::make_shared<const std::vector<Node>>(constant_nodes(value)), 0);
}

std::string Expr::str() const {
  std::string out;
  print(*nodes_, root_, 0, out);
  return out;
}

double Expr::eval(const EvalPoint& point) const {
  forward(*nodes_, point, {}, {}, false);
  return scratch.values[root_];
}

double Expr::eval_gradient(const EvalPoint& point, std::span<const VarRef> coords,
                           Eigen::Ref<Eigen::VectorXd> gradient,
                           std::span<const std::int8_t> forced) const {
  forward(*nodes_, point, coords, forced, true);
  gradient = scratch.grads.col(root_);
  return scratch.values[root_];
}

std::vector<KinkArgument> Expr::kink_arguments(const EvalPoint& point,
                                               std::span<const VarRef> coords,
                                               std::span<const std::int8_t> forced) const {
  forward(*nodes_, point, coords, forced, true);
  std::vector<KinkArgument> out;
  int ordinal = 0;
  for (std::size_t i = 0; i < nodes_->size(); ++i) {
    const Node& n = (*nodes_)[i];
    if (n.op != Op::abs) continue;
    KinkArgument k;
    k.ordinal = ordinal++;
    k.value = scratch.values[n.lhs];
    k.gradient = scratch.grads.col(n.lhs);
    out.push_back(std::move(k));
  }
  return out;
}

bool Expr::uses(VarKind kind) const {
  for (const Node& n : *nodes_) {
    if (n.op == Op::variable && n.var.kind == kind) return true;
  }
  return false;
}

bool Expr::is_constant() const {
  for (const Node& n : *nodes_) {
    if (n.op == Op::variable) return false;
  }
  return true;
}

bool operator==(const Expr& a, const Expr& b) {
  return same_tree(*a.nodes_, a.root_, *b.nodes_, b.root_);
}

double parse_constant(std::string_view text) {
  Parser parser(text, Dims{}, false);
  int root = 0;
  auto nodes = parser.run(root);
  Expr e(std::make_shared<const std::vector<Node>>(std::move(nodes)), root);
  return e.eval(EvalPoint{});
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

}  // namespace goh
