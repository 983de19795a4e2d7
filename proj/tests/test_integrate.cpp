#include "doctest.h"

#include "example_problem.hpp"
#include "goh/random.hpp"

#include <cmath>

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

goh::SelectionPolicy negative_branch() {
  goh::SelectionPolicy p;
  p.entries["g1:0"] = -1;
  return p;
}

}  // namespace

TEST_CASE("candidate reaches (1, 0, 0, 1) with cost 1") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, example_candidate(), goh::initial_state(P));
  const VectorXd e = traj.endpoint();
  CHECK(std::abs(e[0] - 1) < 1e-12);
  CHECK(std::abs(e[1]) < 1e-12);
  CHECK(std::abs(e[2]) < 1e-12);
  CHECK(std::abs(e[3] - 1) < 1e-12);
  CHECK(goh::extended_cost(P, e) == doctest::Approx(1));
  CHECK(e[5] == doctest::Approx(1));
}

TEST_CASE("impulsive schedule reaches (1, 0, 0, 0) with beta 1 + 2 sqrt 2") {
  const auto P = example_problem();
  const auto ctrl = example_impulsive();
  CHECK(goh::schedule_length(ctrl) == doctest::Approx(2 + 2 * std::sqrt(2.0)));
  const auto traj = goh::solve_forward(P, ctrl, goh::initial_state(P));
  const VectorXd e = traj.endpoint();
  CHECK((e.head(4) - Eigen::Vector4d(1, 0, 0, 0)).norm() < 1e-10);
  CHECK(e[5] == doctest::Approx(1 + 2 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(goh::extended_cost(P, e)) < 1e-12);
  // y0 is frozen on the impulsive legs.
  CHECK(traj.at(3.0)[0] == doctest::Approx(1));
}

TEST_CASE("constant drift") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, {piece(3, 1, 0, 0)}, goh::initial_state(P));
  for (double s : {0.0, 0.7, 1.5, 3.0}) CHECK(traj.state(P, s)[2] == doctest::Approx(2 - s));
}

TEST_CASE("step halving changes the endpoints by less than 1e-8") {
  const auto P = example_problem();
  for (const auto& ctrl : {example_candidate(), example_impulsive()}) {
    goh::IntegrateOptions coarse;
    goh::IntegrateOptions fine;
    fine.rel_step = coarse.rel_step / 2;
    fine.max_step = coarse.max_step / 2;
    const VectorXd a = goh::solve_forward(P, ctrl, goh::initial_state(P), coarse).endpoint();
    const VectorXd b = goh::solve_forward(P, ctrl, goh::initial_state(P), fine).endpoint();
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("beta equals the integral of |w|") {
  const auto P = example_problem();
  goh::Rng rng(11);
  goh::ControlSchedule ctrl;
  double total = 0;
  for (int k = 0; k < 6; ++k) {
    auto p = piece(rng.uniform(0.05, 0.5), rng.uniform(), rng.normal(), rng.normal());
    total += p.duration * p.w.norm();
    ctrl.push_back(p);
  }
  const auto traj = goh::solve_forward(P, ctrl, goh::initial_state(P));
  CHECK(traj.endpoint()[5] == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("rate independence under random reparametrizations") {
  const auto P = example_problem();
  const auto ctrl = example_candidate();
  const VectorXd ref = goh::solve_forward(P, ctrl, goh::initial_state(P)).endpoint();
  goh::Rng rng(17);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> hat{0}, s{0};
    for (int j = 0; j < 3; ++j) {
      hat.push_back(hat.back() + rng.uniform(0.2, 2));
      s.push_back(s.back() + rng.uniform(0.2, 2));
    }
    for (auto& v : s) v *= 2.0 / s.back();
    const auto r = goh::reparametrize(ctrl, hat, s);
    const VectorXd e = goh::solve_forward(P, r, goh::initial_state(P)).endpoint();
    CHECK((e - ref).lpNorm<Eigen::Infinity>() < 1e-7);
    CHECK(std::abs(goh::extended_cost(P, e) - goh::extended_cost(P, ref)) < 1e-7);
  }
}

TEST_CASE("fundamental matrix") {
  auto zero = [](double) { return MatrixXd::Zero(3, 3); };
  CHECK(goh::fundamental_matrix(zero, 0, 1, 10).isIdentity());
  const Vector3d a(0.5, -1, 2);
  auto diag = [&](double) { return MatrixXd(a.asDiagonal()); };
  const MatrixXd V = goh::fundamental_matrix(diag, 0.2, 1.1, 1000);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(V(i, i) - std::exp(a[i] * 0.9)) < 1e-8);
  auto varying = [](double s) {
    MatrixXd m(2, 2);
    m << 0, 1, -s, std::sin(s);
    return m;
  };
  const MatrixXd whole = goh::fundamental_matrix(varying, 0, 2, 2000);
  const MatrixXd split = goh::fundamental_matrix(varying, 0.8, 2, 1200) * goh::fundamental_matrix(varying, 0, 0.8, 800);
  CHECK((whole - split).norm() < 1e-8);
}

TEST_CASE("adjoint of the example under the negative branch is (0, 2 - s, -1)") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, example_candidate(), goh::initial_state(P));
  const auto res = goh::solve_adjoint(P, traj, Vector3d(0, 0, -1), 0.5, negative_branch());
  CHECK(res.consistent);
  CHECK(res.max_residual < 1e-12);
  for (double s : {0.0, 0.5, 1.3, 2.0}) {
    CHECK((res.p.at(s) - Vector3d(0, 2 - s, -1)).norm() < 1e-10);
    CHECK((res.p.derivative(s) - Vector3d(0, -1, 0)).norm() < 1e-8);
  }
}

TEST_CASE("zero terminal data gives the zero costate") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, example_impulsive(), goh::initial_state(P));
  const auto res = goh::solve_adjoint(P, traj, Vector3d::Zero(), 0, {});
  for (double s : {0.0, 1.0, 3.0, traj.S()}) CHECK(res.p.at(s).norm() == 0);
  CHECK(res.max_residual == 0);
}

TEST_CASE("midpoint policy halves the slope and stays in the inclusion") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, example_candidate(), goh::initial_state(P));
  const auto res = goh::solve_adjoint(P, traj, Vector3d(0, 0, -1), 0.5, {});
  CHECK(res.max_residual < 1e-12);
  CHECK(res.p.derivative(1.0)[1] == doctest::Approx(-0.5));
  CHECK(res.p.at(0)[1] == doctest::Approx(1));
}

TEST_CASE("analytic costate membership") {
  const auto P = example_problem();
  const auto traj = goh::solve_forward(P, example_candidate(), goh::initial_state(P));
  std::vector<double> grid;
  for (int k = 0; k < 40; ++k) grid.push_back((k + 0.5) * 2.0 / 40);
  const goh::Dims d{3, 2, 0};
  auto costate = [&](const char* p2) {
    goh::Multipliers m;
    m.p0 = -1;
    m.lambda = 0.5;
    m.p = goh::Costate::analytic({goh::Expr::parse("0", d), goh::Expr::parse(p2, d), goh::Expr::parse("-1", d)});
    return m;
  };
  CHECK(goh::verify_adjoint_membership(P, traj, costate("2 - s"), grid).max_residual < 1e-7);
  CHECK(goh::verify_adjoint_membership(P, traj, costate("2 * s"), grid).max_residual > 1);
  goh::Multipliers zero;
  zero.p = goh::Costate::zero(3);
  CHECK(goh::verify_adjoint_membership(P, traj, zero, grid).max_residual == 0);
  // The variant fields move the inclusion to dp2/ds in [0, 1].
  const auto V = example_problem(true);
  const auto vt = goh::solve_forward(V, example_candidate(), goh::initial_state(V));
  CHECK(goh::verify_adjoint_membership(V, vt, costate("2 - s"), grid).max_residual == doctest::Approx(1));
  CHECK(goh::verify_adjoint_membership(V, vt, costate("s"), grid).max_residual < 1e-7);
}

TEST_CASE("forward-backward duality on a smooth problem") {
  const goh::Dims d{2, 1, 0};
  goh::StrictProblem P;
  P.n = 2;
  P.m = 1;
  P.m1 = 1;
  P.f = goh::NonsmoothField::parse({"x2", "-x1 + 0.1 * x1^2"}, d);
  P.g.push_back(goh::NonsmoothField::parse({"0", "1 + x1 * x2"}, d));
  P.l0 = goh::Expr::parse("x1^2 + x2", d);
  P.psi = goh::NonsmoothField({goh::Expr::parse("x1", d)}, {{goh::VarKind::t, 0}, {goh::VarKind::x, 0}, {goh::VarKind::x, 1}});
  P.x0 = Vector2d(0.5, -0.2);
  P.C = goh::PolyhedralCone::whole_space(1);
  goh::ControlSchedule ctrl;
  for (double u : {0.3, -0.6, 0.1}) {
    goh::ControlPiece p;
    p.duration = 0.7;
    p.w0 = 0.8;
    p.w = VectorXd::Constant(1, u);
    ctrl.push_back(p);
  }
  const auto traj = goh::solve_forward(P, ctrl, goh::initial_state(P));
  const double lambda = 0.7;
  const Vector2d pS(0.4, -1.3);
  const auto adj = goh::solve_adjoint(P, traj, pS, lambda, {});
  const Vector2d v0(1, 2);
  const MatrixXd E = goh::transport_matrix(P, traj, 0.0);
  const VectorXd vS = E.block(1, 1, 3, 2) * v0;  // (Phi v0, int omega Phi v0)
  const double lhs = pS.dot(vS.head(2)) - adj.p.at(0).dot(v0) - lambda * vS[2];
  CHECK(std::abs(lhs) < 1e-6);
  CHECK(E(0, 0) == 1);
  CHECK(E(P.n + 1, P.n + 1) == 1);
}

TEST_CASE("analytic costate derivative") {
  const goh::Dims d{1, 0, 0};
  const auto c = goh::Costate::analytic({goh::Expr::parse("s^2 - 3 * s", d)});
  CHECK(c.at(2)[0] == -2);
  CHECK(c.derivative(2)[0] == 1);
}
