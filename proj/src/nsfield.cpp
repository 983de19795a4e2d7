#include "goh/nsfield.hpp"

#include "goh/lp.hpp"
#include "goh/random.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace goh {

NonsmoothField::NonsmoothField(std::vector<Expr> components, std::vector<VarRef> coords)
    : components_(std::move(components)), coords_(std::move(coords)) {}

std::vector<VarRef> NonsmoothField::state_coords(int n) {
  std::vector<VarRef> c;
  for (int i = 0; i < n; ++i) c.push_back({VarKind::x, i});
  return c;
}

NonsmoothField NonsmoothField::parse(const std::vector<std::string>& components, const Dims& dims) {
  std::vector<Expr> exprs;
  for (const auto& text : components) exprs.push_back(Expr::parse(text, dims));
  return {std::move(exprs), state_coords(dims.n)};
}

int NonsmoothField::kink_count() const {
  int k = 0;
  for (const auto& e : components_) k += e.kink_count();
  return k;
}

std::string NonsmoothField::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) s += ", ";
    s += components_[i].str();
  }
  return s + ")";
}

EvalPoint NonsmoothField::at(const Eigen::VectorXd& z, const EvalPoint& ctx) const {
  if (z.size() != arity()) throw std::invalid_argument("point has wrong dimension");
  EvalPoint p = ctx;
  for (int i = 0; i < arity(); ++i) p.set(coords_[i], z[i]);
  return p;
}

Eigen::VectorXd NonsmoothField::eval(const Eigen::VectorXd& z, const EvalPoint& ctx) const {
  const EvalPoint p = at(z, ctx);
  Eigen::VectorXd v(size());
  for (int i = 0; i < size(); ++i) v[i] = components_[i].eval(p);
  return v;
}

Eigen::MatrixXd NonsmoothField::jacobian(const Eigen::VectorXd& z, const EvalPoint& ctx,
                                         const SignTable& forced) const {
  const EvalPoint p = at(z, ctx);
  Eigen::MatrixXd jac(size(), arity());
  Eigen::VectorXd row(arity());
  for (int i = 0; i < size(); ++i) {
    std::span<const std::int8_t> f;
    if (i < static_cast<int>(forced.size())) f = forced[i];
    components_[i].eval_gradient(p, coords_, row, f);
    jac.row(i) = row.transpose();
  }
  return jac;
}

std::vector<KinkId> NonsmoothField::active_kinks(const Eigen::VectorXd& z, const EvalPoint& ctx,
                                                 double tol) const {
  const EvalPoint p = at(z, ctx);
  std::vector<KinkId> out;
  for (int i = 0; i < size(); ++i) {
    if (components_[i].kink_count() == 0) continue;
    for (const auto& k : components_[i].kink_arguments(p, coords_)) {
      if (std::abs(k.value) <= tol) out.push_back({i, k.ordinal});
    }
  }
  return out;
}

double NonsmoothField::kink_margin(const Eigen::VectorXd& z, const EvalPoint& ctx) const {
  const EvalPoint p = at(z, ctx);
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : components_) {
    if (e.kink_count() == 0) continue;
    for (const auto& k : e.kink_arguments(p, coords_)) m = std::min(m, std::abs(k.value));
  }
  return m;
}

NonsmoothField NonsmoothField::stack(const NonsmoothField& a, const NonsmoothField& b) {
  if (!(a.coords_ == b.coords_)) throw std::invalid_argument("fields use different coordinates");
  std::vector<Expr> comps = a.components_;
  comps.insert(comps.end(), b.components_.begin(), b.components_.end());
  return {std::move(comps), a.coords_};
}

std::variant<Eigen::MatrixXd, KinkReport> jacobian_ae(const NonsmoothField& f,
                                                      const Eigen::VectorXd& z,
                                                      const EvalPoint& ctx, double kink_tol) {
  auto active = f.active_kinks(z, ctx, kink_tol);
  if (!active.empty()) return KinkReport{std::move(active)};
  return f.jacobian(z, ctx);
}

namespace {

struct ActiveKink {
  KinkId id;
  Eigen::VectorXd gradient;
};

std::vector<ActiveKink> active_with_gradients(const NonsmoothField& f, const Eigen::VectorXd& z,
                                              const EvalPoint& ctx, double tol) {
  const EvalPoint p = f.at(z, ctx);
  std::vector<ActiveKink> out;
  for (int i = 0; i < f.size(); ++i) {
    const Expr& e = f.components()[i];
    if (e.kink_count() == 0) continue;
    for (auto& k : e.kink_arguments(p, f.coords())) {
      if (std::abs(k.value) <= tol) out.push_back({{i, k.ordinal}, std::move(k.gradient)});
    }
  }
  return out;
}

// sigma_k * grad_k . h >= 1 for all active kinks, h free.
bool linearized_feasible(const std::vector<ActiveKink>& active, const std::vector<std::int8_t>& sigma,
                         int d) {
  lp::Problem prob(d);
  for (int j = 0; j < d; ++j) prob.set_free(j);
  for (std::size_t k = 0; k < active.size(); ++k) {
    prob.add(sigma[k] * active[k].gradient, lp::Sense::ge, 1.0);
  }
  return prob.solve().status == lp::Status::optimal;
}

}  // namespace

std::vector<PatternJacobian> sign_patterns(const NonsmoothField& f, const Eigen::VectorXd& z,
                                           double radius, const EvalPoint& ctx,
                                           const PatternOptions& opts) {
  if (!(radius > 0.0)) throw std::invalid_argument("pattern radius must be positive");
  const auto active = active_with_gradients(f, z, ctx, opts.kink_tol);
  const int k = static_cast<int>(active.size());
  if (k > opts.cap) {
    throw std::runtime_error("sign-pattern cap exceeded: " + std::to_string(k) +
                             " active kinks, cap " + std::to_string(opts.cap));
  }
  if (k == 0) {
    return {{SignPattern{}, f.jacobian(z, ctx)}};
  }

  // Sign vectors realized by sample points in the ball.
  const int d = f.arity();
  std::vector<std::vector<std::int8_t>> realized;
  for (int s = 0; s < opts.samples; ++s) {
    Rng rng(derive_seed(opts.seed, 0x5167, static_cast<std::uint64_t>(s)));
    const Eigen::VectorXd pt = z + sample_ball(rng, d, radius);
    const EvalPoint p = f.at(pt, ctx);
    std::vector<std::int8_t> sig(k, 0);
    for (int a = 0; a < k; ++a) {
      const auto& id = active[a].id;
      const auto args = f.components()[id.component].kink_arguments(p, f.coords());
      const double v = args[id.ordinal].value;
      sig[a] = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    }
    realized.push_back(std::move(sig));
  }

  std::vector<PatternJacobian> out;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    std::vector<std::int8_t> sigma(k);
    for (int a = 0; a < k; ++a) sigma[a] = (mask >> a) & 1u ? 1 : -1;
    bool feasible = false;
    for (const auto& r : realized) {
      if (r == sigma) {
        feasible = true;
        break;
      }
    }
    if (!feasible) feasible = linearized_feasible(active, sigma, d);
    if (!feasible) continue;

    SignTable forced(f.size());
    for (int i = 0; i < f.size(); ++i) forced[i].assign(f.components()[i].kink_count(), 0);
    SignPattern pat;
    pat.radius = radius;
    for (int a = 0; a < k; ++a) {
      forced[active[a].id.component][active[a].id.ordinal] = sigma[a];
      pat.kinks.push_back(active[a].id);
    }
    pat.signs = sigma;
    out.push_back({std::move(pat), f.jacobian(z, ctx, forced)});
  }
  if (out.empty()) {
    // Kink arguments vanish identically near z; abs' multiplies a zero gradient.
    out.push_back({SignPattern{}, f.jacobian(z, ctx)});
  }
  return out;
}

}  // namespace goh
