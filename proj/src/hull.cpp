#include "goh/hull.hpp"

#include "goh/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace goh {

ConvexHullSet::ConvexHullSet(std::vector<Eigen::VectorXd> vertices, int rows, int cols)
    : vertices_(std::move(vertices)), rows_(rows), cols_(cols) {
  if (vertices_.empty()) throw std::invalid_argument("convex hull needs at least one vertex");
  for (const auto& v : vertices_) {
    if (v.size() != rows_ * cols_) throw std::invalid_argument("vertex has wrong size");
  }
}

ConvexHullSet ConvexHullSet::from_matrices(const std::vector<Eigen::MatrixXd>& mats) {
  if (mats.empty()) throw std::invalid_argument("convex hull needs at least one vertex");
  std::vector<Eigen::VectorXd> v;
  for (const auto& m : mats) v.push_back(m.reshaped());
  return {std::move(v), static_cast<int>(mats[0].rows()), static_cast<int>(mats[0].cols())};
}

ConvexHullSet ConvexHullSet::from_vectors(std::vector<Eigen::VectorXd> vecs) {
  if (vecs.empty()) throw std::invalid_argument("convex hull needs at least one vertex");
  const int r = static_cast<int>(vecs[0].size());
  return {std::move(vecs), r, 1};
}

Eigen::MatrixXd ConvexHullSet::matrix(int i) const {
  return vertices_[i].reshaped(rows_, cols_);
}

ConvexHullSet ConvexHullSet::reduced(double tol) const {
  std::vector<Eigen::VectorXd> unique;
  for (const auto& v : vertices_) {
    bool dup = false;
    for (const auto& u : unique) {
      if ((u - v).lpNorm<Eigen::Infinity>() <= tol) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(v);
  }
  // Points maximizing a linear functional are extreme; they settle most of
  // the remaining points with a projection onto a small set.
  const int k = static_cast<int>(unique.size());
  const int dim = rows_ * cols_;
  std::vector<bool> known(k, false);
  Rng rng(0x68756c6cULL);
  for (int dir = 0; dir < 2 * dim + 64 && k > 1; ++dir) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
    if (dir < 2 * dim) {
      c[dir / 2] = dir % 2 ? -1.0 : 1.0;
    } else {
      for (int i = 0; i < dim; ++i) c[i] = rng.normal();
    }
    int best = 0;
    int ties = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      const double v = c.dot(unique[i]);
      if (v > best_val + tol) {
        best_val = v;
        best = i;
        ties = 0;
      } else if (v >= best_val - tol) {
        ++ties;
      }
    }
    if (ties == 0) known[best] = true;
  }
  std::vector<Eigen::VectorXd> extreme;
  for (int i = 0; i < k; ++i) {
    if (known[i]) extreme.push_back(unique[i]);
  }
  std::vector<bool> removed(k, false);
  for (int i = 0; i < k && k > 1; ++i) {
    if (known[i]) continue;
    if (!extreme.empty() && (project_to_hull(extreme, unique[i]) - unique[i]).norm() <= tol) {
      removed[i] = true;
      continue;
    }
    std::vector<Eigen::VectorXd> others;
    for (int j = 0; j < k; ++j) {
      if (j != i && !removed[j]) others.push_back(unique[j]);
    }
    if (!others.empty() && (project_to_hull(others, unique[i]) - unique[i]).norm() <= tol) {
      removed[i] = true;
    } else {
      extreme.push_back(unique[i]);
    }
  }
  std::vector<Eigen::VectorXd> kept;
  for (int i = 0; i < k; ++i) {
    if (!removed[i]) kept.push_back(unique[i]);
  }
  unique = std::move(kept);
  ConvexHullSet out(std::move(unique), rows_, cols_);
  out.method = method;
  out.radii = radii;
  out.samples = samples;
  return out;
}

ConvexHullSet ConvexHullSet::negated() const {
  std::vector<Eigen::VectorXd> v;
  for (const auto& x : vertices_) v.push_back(-x);
  ConvexHullSet out(std::move(v), rows_, cols_);
  out.method = method;
  out.radii = radii;
  out.samples = samples;
  return out;
}

double ConvexHullSet::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices_.size(); ++j) {
      d = std::max(d, (vertices_[i] - vertices_[j]).norm());
    }
  }
  return d;
}

Eigen::VectorXd project_to_hull(const std::vector<Eigen::VectorXd>& points,
                                const Eigen::VectorXd& target) {
  if (points.empty()) throw std::invalid_argument("projection onto an empty hull");
  const int k = static_cast<int>(points.size());
  const int d = static_cast<int>(target.size());
  Eigen::MatrixXd P(d, k);
  for (int i = 0; i < k; ++i) P.col(i) = points[i] - target;
  double scale = 0.0;
  for (int i = 0; i < k; ++i) scale = std::max(scale, P.col(i).squaredNorm());
  if (scale == 0.0) return target;
  const double eps = 1e-12 * scale;

  int start = 0;
  for (int i = 1; i < k; ++i) {
    if (P.col(i).squaredNorm() < P.col(start).squaredNorm()) start = i;
  }
  std::vector<int> active{start};
  std::vector<double> lambda{1.0};
  Eigen::VectorXd x = P.col(start);

  for (int major = 0; major < 10 * k + 50; ++major) {
    Eigen::VectorXd dots = P.transpose() * x;
    int j = 0;
    dots.minCoeff(&j);
    if (x.dot(x) - dots[j] <= eps) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    for (int minor = 0; minor < 10 * k + 50; ++minor) {
      // Affine minimizer over the active set.
      const int a = static_cast<int>(active.size());
      Eigen::MatrixXd S(d, a);
      for (int i = 0; i < a; ++i) S.col(i) = P.col(active[i]);
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(a + 1, a + 1);
      K.topLeftCorner(a, a) = S.transpose() * S;
      K.block(0, a, a, 1).setOnes();
      K.block(a, 0, 1, a).setOnes();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a + 1);
      rhs[a] = 1.0;
      const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
      const Eigen::VectorXd alpha = sol.head(a);
      if ((alpha.array() > 1e-14).all()) {
        for (int i = 0; i < a; ++i) lambda[i] = alpha[i];
        break;
      }
      double theta = 1.0;
      for (int i = 0; i < a; ++i) {
        if (alpha[i] <= 1e-14 && lambda[i] - alpha[i] > 0.0) {
          theta = std::min(theta, lambda[i] / (lambda[i] - alpha[i]));
        }
      }
      std::vector<int> keep_idx;
      std::vector<double> keep_lambda;
      for (int i = 0; i < a; ++i) {
        const double l = theta * alpha[i] + (1.0 - theta) * lambda[i];
        if (l > 1e-14) {
          keep_idx.push_back(active[i]);
          keep_lambda.push_back(l);
        }
      }
      if (keep_idx.empty()) {
        keep_idx.push_back(active.back());
        keep_lambda.push_back(1.0);
      }
      active = std::move(keep_idx);
      lambda = std::move(keep_lambda);
    }
    double sum = 0.0;
    for (double l : lambda) sum += l;
    x.setZero();
    for (std::size_t i = 0; i < active.size(); ++i) x += (lambda[i] / sum) * P.col(active[i]);
  }
  return x + target;
}

double hull_distance(const ConvexHullSet& set, const Eigen::VectorXd& target) {
  return (project_to_hull(set.vertices(), target) - target).norm();
}

double hausdorff(const ConvexHullSet& a, const ConvexHullSet& b) {
  if (a.rows() * a.cols() != b.rows() * b.cols()) {
    throw std::invalid_argument("hausdorff distance between sets of different shape");
  }
  double h = 0.0;
  for (const auto& v : a.vertices()) h = std::max(h, hull_distance(b, v));
  for (const auto& v : b.vertices()) h = std::max(h, hull_distance(a, v));
  return h;
}

}  // namespace goh
