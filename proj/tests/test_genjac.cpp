#include "doctest.h"

#include "fields.hpp"
#include "goh/genjac.hpp"
#include "goh/random.hpp"

#include <cmath>

using Eigen::Vector3d;
using Eigen::VectorXd;
using goh::JacobianMethod;

namespace {

// Third component of [g1, g2] at (y1 > 0, y2 = 0) by hand: Dg2 g1 - Dg1 g2 with
// Dg2 row 3 = (2, 0, 0), g1 = (1, 0, 0), Dg1 row 3 = (0, 1 - s, 0), g2 = (0, 1, 2 y1)
// gives 2 - (1 - s) = 1 + s for the as-printed field and 2 - (s - 1) = 3 - s for
// the variant, s = +-1.
goh::ConvexHullSet expected_bracket(bool variant) {
  std::vector<VectorXd> v;
  for (double s : {-1.0, 1.0}) v.push_back(Vector3d(0, 0, variant ? 3 - s : 1 + s));
  return goh::ConvexHullSet::from_vectors(v);
}

goh::NonsmoothField rotation_field() { return field({"-x2", "x1", "0"}, 3); }
goh::NonsmoothField smooth_field() { return field({"x2 * x3", "x1^2", "1 + x2"}, 3); }

}  // namespace

TEST_CASE("Clarke Jacobian of |x| at 0 is [-1, 1]") {
  const auto f = field({"abs(x1)"}, 1);
  for (auto m : {JacobianMethod::enumeration, JacobianMethod::sampling}) {
    const auto h = goh::clarke_jacobian(f, VectorXd::Zero(1), m);
    CHECK(h.size() == 2);
    const auto iv = goh::covector_interval(VectorXd::Ones(1), goh::ConvexHullSet::from_vectors(h.vertices()));
    CHECK(iv.lo == doctest::Approx(-1));
    CHECK(iv.hi == doctest::Approx(1));
  }
  // The mollified estimate is a single averaged slope inside the hull.
  const auto mol = goh::clarke_jacobian(f, VectorXd::Zero(1), JacobianMethod::mollified);
  for (const auto& v : mol.vertices()) CHECK(std::abs(v[0]) <= 1.0);
}

TEST_CASE("Clarke Jacobian of a smooth field is the classical one") {
  const auto f = smooth_field();
  const Vector3d z(0.3, -0.4, 0.5);
  const Eigen::MatrixXd jac = f.jacobian(z);
  for (auto m : {JacobianMethod::enumeration, JacobianMethod::sampling}) {
    const auto h = goh::clarke_jacobian(f, z, m);
    if (m == JacobianMethod::enumeration) {
      REQUIRE(h.size() == 1);
      CHECK((h.matrix(0) - jac).norm() < 1e-12);
    } else {
      // samples at radius r vary by O(r)
      for (int i = 0; i < h.size(); ++i) CHECK((h.matrix(i) - jac).norm() < 1e-4);
    }
  }
}

TEST_CASE("Clarke Jacobian of g1 at (1, 0, 0)") {
  for (auto m : {JacobianMethod::enumeration, JacobianMethod::sampling}) {
    const auto h = goh::clarke_jacobian(example_g1(), Vector3d(1, 0, 0), m);
    REQUIRE(h.size() == 2);
    std::vector<double> vals;
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXd mat = h.matrix(i);
      vals.push_back(mat(2, 1));
      mat(2, 1) = 0.0;
      CHECK(mat.norm() == 0.0);
    }
    std::sort(vals.begin(), vals.end());
    CHECK(vals == std::vector<double>{0.0, 2.0});
  }
}

TEST_CASE("set-valued bracket: smooth pair and self bracket") {
  const auto g = field({"1", "0"}, 2);
  const auto h = field({"0", "x1"}, 2);
  goh::Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector2d z(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const auto b = goh::setvalued_bracket(g, h, z, JacobianMethod::enumeration);
    REQUIRE(b.size() == 1);
    CHECK((b.vertex(0) - Eigen::Vector2d(0, 1)).norm() == 0.0);
  }
  for (const auto& f : {example_g1(), example_g2(), field({"abs(x1) - x2", "min(x1, x3)", "x2"}, 3)}) {
    const auto b = goh::setvalued_bracket(f, f, Vector3d(0, 0, 0), JacobianMethod::enumeration);
    REQUIRE(b.size() == 1);
    CHECK(b.vertex(0).norm() == 0.0);
  }
}

TEST_CASE("bracket of the example fields on y1 > 0, y2 = 0") {
  goh::Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const Vector3d z(rng.uniform(0.05, 2), 0, rng.uniform(-1, 1));
    for (bool variant : {false, true}) {
      const auto g1 = variant ? example_g1_variant() : example_g1();
      const auto expected = expected_bracket(variant);
      const auto en = goh::setvalued_bracket(g1, example_g2(), z, JacobianMethod::enumeration);
      const auto sa = goh::setvalued_bracket(g1, example_g2(), z, JacobianMethod::sampling);
      CHECK(goh::hausdorff(en, expected) < 1e-12);
      CHECK(goh::hausdorff(en, sa) <= 0.05 * (1 + en.diameter()));
    }
  }
}

TEST_CASE("antisymmetry holds vertex for vertex") {
  const Vector3d z(0.7, 0, 0.2);
  for (auto m : {JacobianMethod::enumeration, JacobianMethod::sampling}) {
    const auto ab = goh::setvalued_bracket(example_g1(), example_g2(), z, m);
    const auto ba = goh::setvalued_bracket(example_g2(), example_g1(), z, m);
    REQUIRE(ab.size() == ba.size());
    for (int i = 0; i < ab.size(); ++i) CHECK((ab.vertex(i) + ba.vertex(i)).norm() == 0.0);
  }
}

TEST_CASE("smooth brackets reduce to the classical bracket") {
  goh::Rng rng(4);
  const auto g = rotation_field();
  const auto h = smooth_field();
  for (int i = 0; i < 100; ++i) {
    const Vector3d z(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    // By hand: Dh g - Dg h for g = (-x2, x1, 0), h = (x2 x3, x1^2, 1 + x2).
    const Vector3d gz(-z[1], z[0], 0);
    const Vector3d hz(z[1] * z[2], z[0] * z[0], 1 + z[1]);
    Eigen::Matrix3d dh;
    dh << 0, z[2], z[1], 2 * z[0], 0, 0, 0, 1, 0;
    Eigen::Matrix3d dg;
    dg << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    const Vector3d expected = dh * gz - dg * hz;
    const auto b = goh::setvalued_bracket(g, h, z, JacobianMethod::enumeration);
    REQUIRE(b.size() == 1);
    CHECK((b.vertex(0) - expected).norm() < 1e-6);
  }
}

TEST_CASE("sampling hulls shrink with the radius") {
  goh::JacobianParams params;
  const auto f = field({"abs(x1) + 2 * x2", "min(x1, x2)"}, 2);
  const Eigen::Vector2d z(0, 0);
  const auto per_radius = goh::sampled_jacobians(f, z, params);
  for (std::size_t k = 1; k < per_radius.size(); ++k) {
    REQUIRE_FALSE(per_radius[k].empty());
    const auto big = goh::ConvexHullSet::from_matrices(per_radius[k - 1]);
    for (const auto& m : per_radius[k]) {
      CHECK(goh::hull_distance(big, m.reshaped()) <= 1e-6);
    }
  }
}

TEST_CASE("estimators agree on a small corpus") {
  goh::Rng rng(8);
  const std::vector<goh::NonsmoothField> corpus = {
      example_g1(), example_g2(), example_g1_variant(),
      field({"abs(x1 - x2)", "x3", "max(x1, 0)"}, 3),
      field({"abs(x1) + abs(x2)", "x1 * x2", "min(x3, x1)"}, 3),
  };
  for (const auto& f : corpus) {
    for (int i = 0; i < 4; ++i) {
      Vector3d z(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      z[static_cast<int>(rng.uniform() * 3)] = 0.0;  // land on kinks often
      const auto en = goh::clarke_jacobian(f, z, JacobianMethod::enumeration);
      const auto sa = goh::clarke_jacobian(f, z, JacobianMethod::sampling);
      CAPTURE(f.str());
      CHECK(goh::hausdorff(en, sa) <= 0.05 * (1 + en.diameter()));
    }
  }
}

TEST_CASE("covector intervals") {
  const auto paper_hull = goh::ConvexHullSet::from_vectors({Vector3d(0, 0, 2), Vector3d(0, 0, 4)});
  for (double s : {0.0, 0.5, 1.7}) {
    const auto iv = goh::covector_interval(Vector3d(0, 2 - s, -1), paper_hull);
    CHECK(iv.lo == -4.0);
    CHECK(iv.hi == -2.0);
  }
  const auto zero = goh::covector_interval(Vector3d::Zero(), paper_hull);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == 0.0);
  const auto printed = goh::ConvexHullSet::from_vectors({Vector3d(0, 0, 0), Vector3d(0, 0, 2)});
  const auto iv = goh::covector_interval(Vector3d(0, 0, -1), printed);
  CHECK(iv.lo == -2.0);
  CHECK(iv.hi == 0.0);
  CHECK_THROWS_AS(goh::covector_interval(Eigen::Vector2d(1, 1), printed), std::invalid_argument);
  for (double alpha : {0.5, 3.0}) {
    const auto p = Vector3d(0.3, -1, 2);
    const auto a = goh::covector_interval(alpha * p, printed);
    const auto b = goh::covector_interval(p, printed);
    CHECK(a.lo == doctest::Approx(alpha * b.lo));
    CHECK(a.hi == doctest::Approx(alpha * b.hi));
  }
}

TEST_CASE("zero membership verdicts") {
  CHECK(goh::goh_zero_membership({-4, -2}, 1e-6) == goh::Membership::fails);
  CHECK(goh::goh_zero_membership({-2, 0}, 1e-6) == goh::Membership::marginal);
  CHECK(goh::goh_zero_membership({-1, 1}, 1e-6) == goh::Membership::holds);
  CHECK(goh::goh_zero_membership({0, 0}, 1e-6) == goh::Membership::marginal);
  CHECK(goh::goh_zero_membership({1e-7, 2}, 1e-6) == goh::Membership::marginal);
}

TEST_CASE("hull reduction keeps extreme points only") {
  std::vector<VectorXd> pts = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
                               Eigen::Vector2d(0.2, 0.2), Eigen::Vector2d(1, 0), Eigen::Vector2d(0.5, 0.5)};
  const auto h = goh::ConvexHullSet::from_vectors(pts).reduced();
  CHECK(h.size() == 3);
  CHECK(goh::hull_distance(h, Eigen::Vector2d(1, 1)) == doctest::Approx(std::sqrt(0.5)));
  CHECK(goh::hull_distance(h, Eigen::Vector2d(0.1, 0.1)) == doctest::Approx(0.0).epsilon(1e-12));
}
