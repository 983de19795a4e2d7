#include "goh/genjac.hpp"

#include "goh/parallel.hpp"
#include "goh/random.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace goh {

std::string to_string(JacobianMethod m) {
  switch (m) {
    case JacobianMethod::enumeration: return "enumeration";
    case JacobianMethod::sampling: return "sampling";
    case JacobianMethod::mollified: return "mollified";
  }
  return "?";
}

JacobianMethod parse_method(const std::string& name) {
  if (name == "enumeration") return JacobianMethod::enumeration;
  if (name == "sampling") return JacobianMethod::sampling;
  if (name == "mollified") return JacobianMethod::mollified;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::string to_string(Membership m) {
  switch (m) {
    case Membership::holds: return "holds";
    case Membership::marginal: return "marginal";
    case Membership::fails: return "fails";
  }
  return "?";
}

namespace {

double radius(const JacobianParams& p, int k) { return std::ldexp(p.r0, -k); }

PatternOptions pattern_options(const JacobianParams& p) {
  PatternOptions o;
  o.kink_tol = p.kink_tol;
  o.cap = p.cap;
  o.seed = p.seed;
  return o;
}

// Samples at every radius; `eval` returns nothing for rejected points.
template <class Eval>
std::vector<std::vector<Eigen::VectorXd>> sample_schedule(const Eigen::VectorXd& z,
                                                          const JacobianParams& params,
                                                          Eval&& eval) {
  const int d = static_cast<int>(z.size());
  std::vector<std::vector<Eigen::VectorXd>> out(params.radii);
  for (int k = 0; k < params.radii; ++k) {
    std::vector<std::optional<Eigen::VectorXd>> slots(params.samples);
    parallel_for(params.samples, params.jobs, [&](int i) {
      Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(k) + 1, static_cast<std::uint64_t>(i)));
      const Eigen::VectorXd pt = z + sample_ball(rng, d, radius(params, k));
      slots[i] = eval(pt);
    });
    for (auto& s : slots) {
      if (s) out[k].push_back(std::move(*s));
    }
  }
  return out;
}

// Smallest radius with enough accepted samples, else the smallest with any.
int pick_radius(const std::vector<std::vector<Eigen::VectorXd>>& per_radius, int min_accepted) {
  for (int k = static_cast<int>(per_radius.size()) - 1; k >= 0; --k) {
    if (static_cast<int>(per_radius[k].size()) >= min_accepted) return k;
  }
  for (int k = static_cast<int>(per_radius.size()) - 1; k >= 0; --k) {
    if (!per_radius[k].empty()) return k;
  }
  throw std::runtime_error("sampling estimator accepted no sample points");
}

std::vector<double> radii_list(const JacobianParams& p) {
  std::vector<double> r;
  for (int k = 0; k < p.radii; ++k) r.push_back(radius(p, k));
  return r;
}

// Monte-Carlo average of the classical Jacobian against the bump on B(0, eps).
Eigen::MatrixXd mollified_jacobian(const NonsmoothField& f, const Eigen::VectorXd& z, double eps,
                                   int index, const JacobianParams& params, const EvalPoint& ctx) {
  const int d = static_cast<int>(z.size());
  std::vector<Eigen::MatrixXd> terms(params.mollifier_samples);
  std::vector<double> weights(params.mollifier_samples, 0.0);
  parallel_for(params.mollifier_samples, params.jobs, [&](int i) {
    Rng rng(derive_seed(params.seed ^ 0x6d6f6c6cULL, static_cast<std::uint64_t>(index),
                        static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd y = sample_ball(rng, d, eps);
    const double r2 = (y / eps).squaredNorm();
    if (r2 >= 1.0) return;
    weights[i] = std::exp(-1.0 / (1.0 - r2));
    terms[i] = f.jacobian(z - y, ctx);
  });
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(f.size(), f.arity());
  double total = 0.0;
  for (int i = 0; i < params.mollifier_samples; ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i] * terms[i];
    total += weights[i];
  }
  if (total <= 0.0) throw std::runtime_error("mollifier quadrature has zero total weight");
  return acc / total;
}

}  // namespace

std::vector<std::vector<Eigen::MatrixXd>> sampled_jacobians(const NonsmoothField& f,
                                                            const Eigen::VectorXd& z,
                                                            const JacobianParams& params,
                                                            const EvalPoint& ctx) {
  const auto flat = sample_schedule(z, params, [&](const Eigen::VectorXd& pt) -> std::optional<Eigen::VectorXd> {
    if (f.kink_margin(pt, ctx) < 10.0 * params.kink_tol) return std::nullopt;
    return f.jacobian(pt, ctx).reshaped();
  });
  std::vector<std::vector<Eigen::MatrixXd>> out(flat.size());
  for (std::size_t k = 0; k < flat.size(); ++k) {
    for (const auto& v : flat[k]) out[k].push_back(v.reshaped(f.size(), f.arity()));
  }
  return out;
}

ConvexHullSet clarke_jacobian(const NonsmoothField& f, const Eigen::VectorXd& z,
                              JacobianMethod method, const JacobianParams& params,
                              const EvalPoint& ctx) {
  ConvexHullSet hull;
  switch (method) {
    case JacobianMethod::enumeration: {
      std::vector<Eigen::MatrixXd> mats;
      for (auto& pj : sign_patterns(f, z, params.pattern_radius, ctx, pattern_options(params))) {
        mats.push_back(std::move(pj.jacobian));
      }
      hull = ConvexHullSet::from_matrices(mats).reduced();
      hull.radii = {params.pattern_radius};
      break;
    }
    case JacobianMethod::sampling: {
      const auto per_radius = sampled_jacobians(f, z, params, ctx);
      std::vector<std::vector<Eigen::VectorXd>> flat(per_radius.size());
      for (std::size_t k = 0; k < per_radius.size(); ++k) {
        for (const auto& m : per_radius[k]) flat[k].push_back(m.reshaped());
      }
      const int k = pick_radius(flat, params.min_accepted);
      hull = ConvexHullSet(flat[k], f.size(), f.arity()).reduced();
      hull.radii = radii_list(params);
      hull.samples = static_cast<int>(flat[k].size());
      break;
    }
    case JacobianMethod::mollified: {
      std::vector<Eigen::MatrixXd> mats;
      for (int k = 0; k < params.radii; ++k) {
        mats.push_back(mollified_jacobian(f, z, radius(params, k), k, params, ctx));
      }
      hull = ConvexHullSet::from_matrices(mats).reduced();
      hull.radii = radii_list(params);
      hull.samples = params.mollifier_samples;
      break;
    }
  }
  hull.method = to_string(method);
  return hull;
}

Eigen::VectorXd classical_bracket(const NonsmoothField& g, const NonsmoothField& h,
                                  const Eigen::VectorXd& z, const EvalPoint& ctx) {
  return h.jacobian(z, ctx) * g.eval(z, ctx) - g.jacobian(z, ctx) * h.eval(z, ctx);
}

ConvexHullSet setvalued_bracket(const NonsmoothField& g, const NonsmoothField& h,
                                const Eigen::VectorXd& z, JacobianMethod method,
                                const JacobianParams& params, const EvalPoint& ctx) {
  if (g.size() != g.arity() || h.size() != h.arity() || g.size() != h.size()) {
    throw std::invalid_argument("bracket needs two vector fields on the same space");
  }
  // Computing in a fixed order makes the result exactly antisymmetric.
  if (g.str() > h.str()) return setvalued_bracket(h, g, z, method, params, ctx).negated();

  const int n = g.size();
  ConvexHullSet hull;
  switch (method) {
    case JacobianMethod::enumeration: {
      const NonsmoothField joint = NonsmoothField::stack(g, h);
      const Eigen::VectorXd gz = g.eval(z, ctx);
      const Eigen::VectorXd hz = h.eval(z, ctx);
      std::vector<Eigen::VectorXd> vecs;
      for (const auto& pj : sign_patterns(joint, z, params.pattern_radius, ctx, pattern_options(params))) {
        vecs.push_back(pj.jacobian.bottomRows(n) * gz - pj.jacobian.topRows(n) * hz);
      }
      hull = ConvexHullSet::from_vectors(std::move(vecs)).reduced();
      hull.radii = {params.pattern_radius};
      break;
    }
    case JacobianMethod::sampling: {
      const auto per_radius = sample_schedule(z, params, [&](const Eigen::VectorXd& pt) -> std::optional<Eigen::VectorXd> {
        const double margin = std::min(g.kink_margin(pt, ctx), h.kink_margin(pt, ctx));
        if (margin < 10.0 * params.kink_tol) return std::nullopt;
        return classical_bracket(g, h, pt, ctx);
      });
      const int k = pick_radius(per_radius, params.min_accepted);
      hull = ConvexHullSet::from_vectors(per_radius[k]).reduced();
      hull.radii = radii_list(params);
      hull.samples = static_cast<int>(per_radius[k].size());
      break;
    }
    case JacobianMethod::mollified: {
      const Eigen::VectorXd gz = g.eval(z, ctx);
      const Eigen::VectorXd hz = h.eval(z, ctx);
      std::vector<Eigen::VectorXd> vecs;
      for (int k = 0; k < params.radii; ++k) {
        const Eigen::MatrixXd dg = mollified_jacobian(g, z, radius(params, k), k, params, ctx);
        const Eigen::MatrixXd dh = mollified_jacobian(h, z, radius(params, k), k, params, ctx);
        vecs.push_back(dh * gz - dg * hz);
      }
      hull = ConvexHullSet::from_vectors(std::move(vecs)).reduced();
      hull.radii = radii_list(params);
      hull.samples = params.mollifier_samples;
      break;
    }
  }
  hull.method = to_string(method);
  return hull;
}

Interval covector_interval(const Eigen::VectorXd& p, const ConvexHullSet& set) {
  if (!set.is_vector() || p.size() != set.rows()) {
    throw std::invalid_argument("covector dimension does not match the set");
  }
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : set.vertices()) {
    const double x = p.dot(v);
    iv.lo = std::min(iv.lo, x);
    iv.hi = std::max(iv.hi, x);
  }
  return iv;
}

Membership goh_zero_membership(const Interval& iv, double tol) {
  if (iv.lo - tol > 0.0 || iv.hi + tol < 0.0) return Membership::fails;
  if (std::abs(iv.lo) <= tol || std::abs(iv.hi) <= tol) return Membership::marginal;
  return Membership::holds;
}

}  // namespace goh
