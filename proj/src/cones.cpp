#include "goh/cones.hpp"

#include "goh/lp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace goh {

PolyhedralCone::PolyhedralCone(int dim, std::vector<Eigen::VectorXd> generators, std::vector<bool> lines)
    : dim_(dim), lines_(std::move(lines)) {
  if (lines_.empty()) lines_.assign(generators.size(), false);
  if (lines_.size() != generators.size()) throw std::invalid_argument("one line flag per generator");
  std::vector<bool> keep_lines;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].size() != dim) throw std::invalid_argument("cone generator has wrong dimension");
    if (generators[i].lpNorm<Eigen::Infinity>() == 0.0) continue;  // zero generators add nothing
    generators_.push_back(generators[i]);
    keep_lines.push_back(lines_[i]);
  }
  lines_ = std::move(keep_lines);
}

PolyhedralCone PolyhedralCone::from_signs(const std::string& signs) {
  const int d = static_cast<int>(signs.size());
  std::vector<Eigen::VectorXd> gens;
  std::vector<bool> lines;
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(d, i);
    switch (signs[i]) {
      case '+': gens.push_back(e); lines.push_back(false); break;
      case '-': gens.push_back(-e); lines.push_back(false); break;
      case '*': gens.push_back(e); lines.push_back(true); break;
      case '0': break;
      default: throw std::invalid_argument("cone sign must be one of + - * 0");
    }
  }
  return {d, std::move(gens), std::move(lines)};
}

PolyhedralCone PolyhedralCone::whole_space(int dim) {
  return from_signs(std::string(static_cast<std::size_t>(dim), '*'));
}

Eigen::MatrixXd PolyhedralCone::spanning_matrix() const {
  int cols = 0;
  for (bool l : lines_) cols += l ? 2 : 1;
  Eigen::MatrixXd m(dim_, cols);
  int c = 0;
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    m.col(c++) = generators_[i];
    if (lines_[i]) m.col(c++) = -generators_[i];
  }
  return m;
}

bool PolyhedralCone::contains(const Eigen::VectorXd& v, double tol) const {
  return lp::in_conic_hull(spanning_matrix(), v, tol);
}

namespace {

struct Ray {
  Eigen::VectorXd v;
  std::vector<int> tight;  // processed constraint indices with a.v = 0 (sorted)
};

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

// Generators of {x : A x <= 0}.
PolyhedralCone double_description(const Eigen::MatrixXd& A, int d) {
  std::vector<Eigen::VectorXd> lineality;
  for (int i = 0; i < d; ++i) lineality.push_back(Eigen::VectorXd::Unit(d, i));
  std::vector<Ray> rays;
  std::vector<int> processed;

  for (int c = 0; c < A.rows(); ++c) {
    const Eigen::VectorXd a = A.row(c).transpose();
    const double an = a.norm();
    if (an == 0.0) continue;
    const double tol = 1e-10 * an;

    int best = -1;
    double best_val = 0.0;
    for (std::size_t i = 0; i < lineality.size(); ++i) {
      const double v = std::abs(a.dot(lineality[i]));
      if (v > tol * lineality[i].norm() && v > best_val) {
        best_val = v;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      Eigen::VectorXd l = lineality[best];
      if (a.dot(l) > 0.0) l = -l;
      const double al = a.dot(l);
      lineality.erase(lineality.begin() + best);
      for (auto& x : lineality) x -= (a.dot(x) / al) * l;
      for (auto& r : rays) {
        r.v -= (a.dot(r.v) / al) * l;
        r.tight.push_back(c);
      }
      rays.push_back({l.normalized(), processed});
      processed.push_back(c);
      continue;
    }

    std::vector<Ray> pos, next;
    std::vector<Ray> neg;
    for (auto& r : rays) {
      const double v = a.dot(r.v);
      if (v > tol * r.v.norm()) {
        pos.push_back(r);
      } else if (v < -tol * r.v.norm()) {
        neg.push_back(r);
      } else {
        r.tight.push_back(c);
        next.push_back(r);
      }
    }
    const int pointed_dim = d - static_cast<int>(lineality.size());
    for (const auto& p : pos) {
      for (const auto& n : neg) {
        const std::vector<int> common = intersect(p.tight, n.tight);
        if (static_cast<int>(common.size()) < pointed_dim - 2) continue;
        int rank = 0;
        if (!common.empty()) {
          Eigen::MatrixXd sub(common.size(), d);
          for (std::size_t i = 0; i < common.size(); ++i) sub.row(i) = A.row(common[i]).normalized();
          Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
          lu.setThreshold(1e-9);
          rank = static_cast<int>(lu.rank());
        }
        if (rank != pointed_dim - 2) continue;
        Ray r;
        r.v = (a.dot(p.v) * n.v - a.dot(n.v) * p.v).normalized();
        r.tight = common;
        r.tight.push_back(c);
        next.push_back(std::move(r));
      }
    }
    for (auto& n : neg) next.push_back(std::move(n));
    rays = std::move(next);
    processed.push_back(c);
  }

  std::vector<Eigen::VectorXd> gens;
  std::vector<bool> lines;
  for (const auto& r : rays) {
    bool dup = false;
    for (const auto& g : gens) {
      if ((g - r.v).norm() < 1e-9) dup = true;
    }
    if (!dup) {
      gens.push_back(r.v);
      lines.push_back(false);
    }
  }
  for (const auto& l : lineality) {
    gens.push_back(l.normalized());
    lines.push_back(true);
  }
  return {d, std::move(gens), std::move(lines)};
}

PolyhedralCone cone_sum(const PolyhedralCone& a, const PolyhedralCone& b) {
  std::vector<Eigen::VectorXd> gens = a.generators();
  std::vector<bool> lines = a.lines();
  gens.insert(gens.end(), b.generators().begin(), b.generators().end());
  lines.insert(lines.end(), b.lines().begin(), b.lines().end());
  return {a.dim(), std::move(gens), std::move(lines)};
}

PolyhedralCone negate(const PolyhedralCone& c) {
  std::vector<Eigen::VectorXd> gens;
  for (const auto& g : c.generators()) gens.push_back(-g);
  return {c.dim(), std::move(gens), c.lines()};
}

void check_dims(const PolyhedralCone& a, const PolyhedralCone& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("cones live in different dimensions");
}

}  // namespace

PolyhedralCone polar(const PolyhedralCone& c) {
  return double_description(c.spanning_matrix().transpose(), c.dim());
}

bool equivalent(const PolyhedralCone& a, const PolyhedralCone& b, double tol) {
  check_dims(a, b);
  const Eigen::MatrixXd ma = a.spanning_matrix();
  const Eigen::MatrixXd mb = b.spanning_matrix();
  for (int i = 0; i < ma.cols(); ++i) {
    if (!b.contains(ma.col(i), tol)) return false;
  }
  for (int i = 0; i < mb.cols(); ++i) {
    if (!a.contains(mb.col(i), tol)) return false;
  }
  return true;
}

PolyhedralCone intersection(const PolyhedralCone& a, const PolyhedralCone& b) {
  check_dims(a, b);
  return polar(cone_sum(polar(a), polar(b)));
}

bool is_transversal(const PolyhedralCone& c1, const PolyhedralCone& c2) {
  check_dims(c1, c2);
  const PolyhedralCone diff = cone_sum(c1, negate(c2));
  const Eigen::MatrixXd m = diff.spanning_matrix();
  for (int i = 0; i < c1.dim(); ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(c1.dim(), i);
    if (!lp::in_conic_hull(m, e) || !lp::in_conic_hull(m, -e)) return false;
  }
  return true;
}

std::optional<Eigen::VectorXd> linearly_separated(const PolyhedralCone& c1, const PolyhedralCone& c2) {
  check_dims(c1, c2);
  const PolyhedralCone forms = polar(cone_sum(negate(c1), c2));
  if (forms.is_zero()) return std::nullopt;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(c1.dim());
  for (std::size_t i = 0; i < forms.generators().size(); ++i) {
    if (!forms.lines()[i]) mu += forms.generators()[i];
  }
  if (mu.norm() < 1e-12) {
    for (std::size_t i = 0; i < forms.generators().size(); ++i) {
      if (forms.lines()[i]) {
        mu = forms.generators()[i];
        break;
      }
    }
  }
  return mu / mu.lpNorm<1>();
}

bool is_strongly_transversal(const PolyhedralCone& c1, const PolyhedralCone& c2) {
  return is_transversal(c1, c2) && !intersection(c1, c2).is_zero();
}

bool is_strongly_transversal(const Multicone& m1, const Multicone& m2) {
  if (m1.empty() || m2.empty()) throw std::invalid_argument("multicone must not be empty");
  std::vector<Eigen::MatrixXd> pair_gens;
  std::size_t combos = 1;
  for (const auto& a : m1) {
    for (const auto& b : m2) {
      if (!is_transversal(a, b)) return false;
      const PolyhedralCone inter = intersection(a, b);
      if (inter.is_zero()) return false;
      pair_gens.push_back(inter.spanning_matrix());
      combos *= static_cast<std::size_t>(pair_gens.back().cols());
      if (combos > 4096) throw std::runtime_error("strong transversality search too large");
    }
  }
  // Some nonzero mu must be positive on one generator of every intersection.
  const int d = m1.front().dim();
  std::vector<int> choice(pair_gens.size(), 0);
  for (std::size_t n = 0; n < combos; ++n) {
    lp::Problem prob(d);
    for (int j = 0; j < d; ++j) prob.set_free(j);
    for (std::size_t p = 0; p < pair_gens.size(); ++p) {
      prob.add(pair_gens[p].col(choice[p]), lp::Sense::ge, 1.0);
    }
    if (prob.solve().status == lp::Status::optimal) return true;
    for (std::size_t p = 0; p < pair_gens.size(); ++p) {
      if (++choice[p] < pair_gens[p].cols()) break;
      choice[p] = 0;
    }
  }
  return false;
}

}  // namespace goh
