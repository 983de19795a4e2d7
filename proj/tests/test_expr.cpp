#include "doctest.h"

#include "goh/expr.hpp"
#include "goh/random.hpp"

#include <cmath>
#include <functional>

using goh::Dims;
using goh::EvalPoint;
using goh::Expr;
using goh::VarKind;
using goh::VarRef;

namespace {

EvalPoint point_x(std::initializer_list<double> xs) {
  EvalPoint p;
  p.x.resize(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double v : xs) p.x[i++] = v;
  return p;
}

int count_abs(const Expr& e) {
  int k = 0;
  for (const auto& n : e.nodes()) k += n.op == goh::Op::abs;
  return k;
}

// Random expression text over x1..x3 without kinks.
std::string random_smooth(goh::Rng& rng, int depth) {
  const double r = rng.uniform();
  if (depth == 0 || r < 0.25) {
    const int pick = static_cast<int>(rng.uniform() * 4);
    if (pick == 3) return goh::format_number(std::round(rng.uniform(-30, 30)) / 10.0);
    return "x" + std::to_string(pick + 1);
  }
  const int op = static_cast<int>(rng.uniform() * 6);
  const std::string a = random_smooth(rng, depth - 1);
  const std::string b = random_smooth(rng, depth - 1);
  switch (op) {
    case 0: return "(" + a + ") + (" + b + ")";
    case 1: return "(" + a + ") - (" + b + ")";
    case 2: return "(" + a + ") * (" + b + ")";
    case 3: return "(" + a + ") / (3 + (" + b + ")^2)";
    case 4: return "-(" + a + ")";
    default: return "(" + a + ")^" + std::to_string(1 + static_cast<int>(rng.uniform() * 3));
  }
}

std::string random_kinked(goh::Rng& rng, int depth) {
  const double r = rng.uniform();
  if (depth == 0 || r < 0.2) return random_smooth(rng, 1);
  const std::string a = random_kinked(rng, depth - 1);
  const std::string b = random_kinked(rng, depth - 1);
  switch (static_cast<int>(rng.uniform() * 5)) {
    case 0: return "abs(" + a + ")";
    case 1: return "min(" + a + ", " + b + ")";
    case 2: return "max(" + a + ", " + b + ")";
    case 3: return a + " - " + b;
    default: return "(" + a + ") * (" + b + ")";
  }
}

}  // namespace

TEST_CASE("parse builds one abs node for x1 + abs(x2)") {
  const Expr e = Expr::parse("x1 + abs(x2)", Dims{2, 0, 0});
  CHECK(count_abs(e) == 1);
  CHECK(e.kink_count() == 1);
  CHECK(e.str() == "x1 + abs(x2)");
}

TEST_CASE("parsed x2 - abs(x2) equals the hand-built tree") {
  const Expr e = Expr::parse("x2 - abs(x2)", Dims{3, 2, 0});
  const auto nodes = e.nodes();
  const auto& root = nodes[e.root()];
  REQUIRE(root.op == goh::Op::sub);
  CHECK(nodes[root.lhs].op == goh::Op::variable);
  CHECK(nodes[root.lhs].var == VarRef{VarKind::x, 1});
  REQUIRE(nodes[root.rhs].op == goh::Op::abs);
  CHECK(nodes[nodes[root.rhs].lhs].var == VarRef{VarKind::x, 1});
  CHECK(e == Expr::parse("(x2) - abs((x2))", Dims{3, 2, 0}));
}

TEST_CASE("syntax errors carry positions") {
  try {
    (void)Expr::parse("x1 +", Dims{2, 0, 0});
    FAIL("expected a parse error");
  } catch (const goh::ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 5);
  }
  CHECK_THROWS_AS((void)Expr::parse("x3", Dims{2, 0, 0}), goh::ParseError);
  CHECK_THROWS_AS((void)Expr::parse("y1", Dims{2, 0, 0}), goh::ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x1^x2", Dims{2, 0, 0}), goh::ParseError);
  CHECK_THROWS_AS((void)Expr::parse("abs(x1", Dims{2, 0, 0}), goh::ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x1 $ 2", Dims{2, 0, 0}), goh::ParseError);
  try {
    (void)Expr::parse("x1 +\n  * x2", Dims{2, 0, 0});
    FAIL("expected a parse error");
  } catch (const goh::ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("eval examples") {
  const Dims d{2, 0, 0};
  CHECK(Expr::parse("x1 + abs(x2)", d).eval(point_x({1, -2})) == 3.0);
  CHECK(Expr::parse("x2 - abs(x2)", d).eval(point_x({0, -0.1})) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(Expr::parse("x1 + abs(x1)", d).eval(point_x({1, 0})) == 2.0);
  CHECK(Expr::parse("min(x1, x2)", d).eval(point_x({3, -1})) == -1.0);
  CHECK(Expr::parse("max(x1, x2)", d).eval(point_x({3, -1})) == 3.0);
  CHECK(Expr::parse("2^0.5/2", d).eval(point_x({0, 0})) == doctest::Approx(std::sqrt(0.5)));
  CHECK(Expr::parse("-x1^2", d).eval(point_x({3, 0})) == -9.0);
}

TEST_CASE("eval errors") {
  const Dims d{2, 1, 0};
  CHECK_THROWS_AS((void)Expr::parse("1 / (x1 - x2)", d).eval(point_x({1, 1})), goh::EvalError);
  CHECK_THROWS_AS((void)Expr::parse("u1", d).eval(point_x({1, 1})), goh::EvalError);
  CHECK_THROWS_AS((void)Expr::parse("x1^0.5", d).eval(point_x({-1, 1})), goh::EvalError);
}

TEST_CASE("other variable families") {
  const Dims d{1, 2, 1};
  EvalPoint p;
  p.t = 2;
  p.s = 3;
  p.w0 = 0.5;
  p.x = Eigen::VectorXd::Constant(1, 1.0);
  p.u = Eigen::Vector2d(4, 5);
  p.a = Eigen::VectorXd::Constant(1, 7.0);
  p.w = Eigen::Vector2d(-1, 1);
  CHECK(Expr::parse("t + s + w0 + x1 + u2 + a1 + w1", d).eval(p) == 2 + 3 + 0.5 + 1 + 5 + 7 - 1);
  CHECK(Expr::parse("s - 2", d).uses(VarKind::s));
  CHECK_FALSE(Expr::parse("s - 2", d).uses(VarKind::x));
  CHECK(Expr::parse("2 * 3", d).is_constant());
}

TEST_CASE("print, parse, print is a fixed point on 50 expressions") {
  goh::Rng rng(7);
  const Dims d{3, 0, 0};
  std::vector<std::string> corpus = {
      "x1 + abs(x2)", "x2 - abs(x2)", "x1 + abs(x1)", "-x1^2", "(-2)^2", "x1 - (x2 - x3)",
      "x1 / (x2 * x3)", "x1 * -2", "--x1", "min(x1, max(x2, x3))", "abs(abs(x1) - 1)",
      "x1^-1", "1e-12 * x1", "(x1 + x2)^3", "-(x1 + x2)", "2^0.5/2",
  };
  while (corpus.size() < 50) corpus.push_back(random_kinked(rng, 3));
  for (const auto& text : corpus) {
    CAPTURE(text);
    const Expr e = Expr::parse(text, d);
    const std::string once = e.str();
    const Expr again = Expr::parse(once, d);
    CHECK(again == e);
    CHECK(again.str() == once);
  }
}

TEST_CASE("gradients match central differences on smooth expressions") {
  goh::Rng rng(11);
  const Dims d{3, 0, 0};
  const std::vector<VarRef> coords = {{VarKind::x, 0}, {VarKind::x, 1}, {VarKind::x, 2}};
  int checked = 0;
  while (checked < 100) {
    const Expr e = Expr::parse(random_smooth(rng, 4), d);
    EvalPoint p = point_x({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    Eigen::VectorXd g(3);
    double value = 0.0;
    try {
      value = e.eval_gradient(p, coords, g);
    } catch (const goh::EvalError&) {
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(p.x[k]));
      EvalPoint a = p, b = p;
      a.x[k] += h;
      b.x[k] -= h;
      const double fd = (e.eval(a) - e.eval(b)) / (2 * h);
      CAPTURE(e.str());
      CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])) + 1e-8 * std::abs(value));
    }
    ++checked;
  }
}

TEST_CASE("forced abs signs override the natural sign") {
  const Expr e = Expr::parse("x2 - abs(x2)", Dims{3, 0, 0});
  const std::vector<VarRef> coords = {{VarKind::x, 0}, {VarKind::x, 1}, {VarKind::x, 2}};
  Eigen::VectorXd g(3);
  e.eval_gradient(point_x({1, 0, 0}), coords, g);
  CHECK(g[1] == 1.0);  // abs'(0) = 0
  const std::int8_t plus[] = {1};
  const std::int8_t minus[] = {-1};
  e.eval_gradient(point_x({1, 0, 0}), coords, g, plus);
  CHECK(g[1] == 0.0);
  e.eval_gradient(point_x({1, 0, 0}), coords, g, minus);
  CHECK(g[1] == 2.0);
  const auto kinks = e.kink_arguments(point_x({1, 0.25, 0}), coords);
  REQUIRE(kinks.size() == 1);
  CHECK(kinks[0].value == 0.25);
  CHECK(kinks[0].gradient[1] == 1.0);
}

TEST_CASE("constants") {
  CHECK(goh::parse_constant("2^0.5/2") == doctest::Approx(0.7071067811865476));
  CHECK(goh::parse_constant("-3") == -3.0);
  CHECK_THROWS_AS(goh::parse_constant("x1"), goh::ParseError);
  CHECK(goh::format_number(0.1) == "0.1");
  CHECK(goh::format_number(-0.0) == "0");
  CHECK(std::stod(goh::format_number(1.0 / 3.0)) == 1.0 / 3.0);
}
