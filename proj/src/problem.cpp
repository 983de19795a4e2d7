#include "goh/problem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace goh {

namespace {

EvalPoint context(const StrictProblem& P, const Eigen::VectorXd& y, double w0, const Eigen::VectorXd& w,
                  const Eigen::VectorXd& a) {
  EvalPoint p;
  p.x = y;
  p.w0 = w0;
  p.w = w;
  p.a = a.size() == P.q ? a : Eigen::VectorXd::Zero(P.q);
  if (w0 > 0.0) p.u = w / w0;
  return p;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void StrictProblem::validate() const {
  require(n > 0, "n must be positive");
  require(m >= 0 && m1 >= 0 && m1 <= m, "need 0 <= m1 <= m");
  require(q >= 0, "q must be nonnegative");
  require(f.size() == n && f.arity() == n, "drift must have n components");
  require(static_cast<int>(g.size()) == m, "need m control fields");
  for (const auto& gi : g) require(gi.size() == n && gi.arity() == n, "control fields must have n components");
  require(psi.size() == 1 && psi.arity() == n + 1, "psi must be a scalar over (t, x)");
  require(x0.size() == n && x0.allFinite(), "x0 must be a finite n-vector");
  require(K > 0.0, "K must be positive");
  require(C.dim() == m, "control cone must live in R^m");
  require(a_lower.size() == q && a_upper.size() == q, "box A must have q bounds");
  require((a_lower.array() <= a_upper.array()).all(), "box A has lower > upper");
  for (const auto& T : target) require(T.dim() == n + 1, "target cones must live in R^(1+n)");
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  for (int i = 0; i < m1; ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(m, i);
    require(C.contains(e) && C.contains(-e), "control cone must contain +-e_i for i <= m1");
  }
}

double control_norm(const StrictProblem& P, const Eigen::VectorXd& w) {
  if (w.size() == 0) return 0.0;
  return P.norm == NormKind::l1 ? w.lpNorm<1>() : w.norm();
}

double schedule_length(const ControlSchedule& ctrl) {
  double s = 0.0;
  for (const auto& p : ctrl) s += p.duration;
  return s;
}

int piece_index(const ControlSchedule& ctrl, double s) {
  double end = 0.0;
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    end += ctrl[i].duration;
    if (s <= end) return static_cast<int>(i);
  }
  return static_cast<int>(ctrl.size()) - 1;
}

std::vector<double> breakpoints(const ControlSchedule& ctrl) {
  std::vector<double> b{0.0};
  for (const auto& p : ctrl) b.push_back(b.back() + p.duration);
  return b;
}

bool is_canonical(const StrictProblem& P, const ControlSchedule& ctrl, double tol) {
  for (const auto& p : ctrl) {
    if (std::abs(p.w0 + control_norm(P, p.w) - 1.0) > tol) return false;
  }
  return true;
}

void validate_schedule(const StrictProblem& P, const ControlSchedule& ctrl) {
  require(!ctrl.empty(), "control schedule is empty");
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    const auto& p = ctrl[i];
    const std::string at = "piece " + std::to_string(i + 1) + ": ";
    require(std::isfinite(p.duration) && p.duration > 0.0, at + "duration must be positive");
    require(p.w0 >= 0.0, at + "w0 must be nonnegative");
    require(p.w.size() == P.m, at + "w must have m entries");
    require(p.alpha.size() == P.q, at + "alpha must have q entries");
    require(P.C.contains(p.w), at + "w is not in the control cone");
    for (int j = 0; j < P.q; ++j) {
      require(p.alpha[j] >= P.a_lower[j] - 1e-12 && p.alpha[j] <= P.a_upper[j] + 1e-12,
              at + "alpha outside the box A");
    }
    require(std::abs(p.zeta) <= P.rho, at + "|zeta| exceeds rho");
    require(p.w0 + control_norm(P, p.w) > 0.0, at + "w0 + |w| must be positive");
  }
}

double StrictProcess::T() const {
  double t = 0.0;
  for (const auto& p : pieces) t += p.duration;
  return t;
}

ControlSchedule extend_controls(const StrictProblem& P, const StrictProcess& sp, const std::vector<double>& rates) {
  require(rates.empty() || rates.size() == sp.pieces.size(), "one rate per strict piece");
  ControlSchedule out;
  for (std::size_t i = 0; i < sp.pieces.size(); ++i) {
    const auto& sp_i = sp.pieces[i];
    require(sp_i.u.allFinite(), "strict control must be bounded on every piece");
    const double w0 = rates.empty() ? 1.0 / (1.0 + control_norm(P, sp_i.u)) : rates[i];
    require(w0 > 0.0, "rates must be positive");
    ControlPiece p;
    p.duration = sp_i.duration / w0;
    p.w0 = w0;
    p.w = sp_i.u * w0;
    p.alpha = sp_i.a.size() == P.q ? sp_i.a : Eigen::VectorXd::Zero(P.q);
    out.push_back(std::move(p));
  }
  return out;
}

StrictProcess restrict_to_strict(const ControlSchedule& ctrl) {
  StrictProcess sp;
  for (const auto& p : ctrl) {
    require(p.w0 > 0.0, "impulsive piece has no strict counterpart");
    sp.pieces.push_back({p.duration * p.w0, p.w / p.w0, p.alpha});
  }
  return sp;
}

ControlSchedule canonicalize(const StrictProblem& P, const ControlSchedule& ctrl) {
  ControlSchedule out;
  for (const auto& p : ctrl) {
    const double c = p.w0 + control_norm(P, p.w);
    require(c > 0.0, "essinf(w0 + |w|) must be positive");
    if (c == 1.0) {
      out.push_back(p);
      continue;
    }
    ControlPiece q = p;
    q.duration = p.duration * c;
    q.w0 = p.w0 / c;
    q.w = p.w / c;
    out.push_back(std::move(q));
  }
  return out;
}

ControlSchedule reparametrize(const ControlSchedule& ctrl, const std::vector<double>& knots_hat,
                              const std::vector<double>& knots_s) {
  require(knots_hat.size() == knots_s.size() && knots_hat.size() >= 2, "sigma needs matching knot lists");
  const std::vector<double> bp = breakpoints(ctrl);
  ControlSchedule out;
  for (std::size_t k = 0; k + 1 < knots_s.size(); ++k) {
    const double dh = knots_hat[k + 1] - knots_hat[k];
    const double ds = knots_s[k + 1] - knots_s[k];
    require(dh > 0.0 && ds > 0.0, "sigma must be strictly increasing");
    const double slope = ds / dh;
    for (std::size_t j = 0; j < ctrl.size(); ++j) {
      const double lo = std::max(bp[j], knots_s[k]);
      const double hi = std::min(bp[j + 1], knots_s[k + 1]);
      if (hi <= lo) continue;
      ControlPiece p = ctrl[j];
      p.duration = (hi - lo) / slope;
      p.w0 = ctrl[j].w0 * slope;
      p.w = ctrl[j].w * slope;
      out.push_back(std::move(p));
    }
  }
  return out;
}

double extrapolate_limit(const std::vector<double>& e) {
  const std::size_t k = e.size();
  require(k >= 4, "need at least four terms to extrapolate");
  for (double v : e) {
    if (!std::isfinite(v)) throw std::runtime_error("recession limit diverges");
  }
  std::vector<double> d(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) d[i] = e[i + 1] - e[i];
  const double scale = std::max(1.0, std::abs(e.back()));
  if (std::abs(d.back()) <= 1e-12 * scale) return e.back();
  // Growing increments: the sequence runs away as r -> 0.
  if (std::abs(d[k - 2]) > std::abs(d[k - 3]) && std::abs(d[k - 3]) > std::abs(d[k - 4])) {
    throw std::runtime_error("recession limit diverges (l1 grows superlinearly in u)");
  }
  // Aitken's delta-squared on the last two triples estimates the order.
  auto aitken = [&](std::size_t i) {
    const double den = d[i + 1] - d[i];
    if (den == 0.0) return e[i + 2];
    return e[i + 2] - d[i + 1] * d[i + 1] / den;
  };
  const double a1 = aitken(k - 3);
  const double a0 = aitken(k - 4);
  if (std::abs(a1 - a0) > 1e-6 * std::max(1.0, std::abs(a1))) {
    throw std::runtime_error("recession limit did not converge");
  }
  return a1;
}

double recession_l1(const StrictProblem& P, const Eigen::VectorXd& x, double w0, const Eigen::VectorXd& w) {
  if (P.recession) return P.recession->eval(context(P, x, w0, w, {}));
  if (!P.l1) return 0.0;
  if (w0 > 0.0) return w0 * P.l1->eval(context(P, x, w0, w, {}));
  if (w.size() == 0 || w.isZero(0.0)) return 0.0;
  std::vector<double> values;
  for (int k = 0; k < 7; ++k) {
    const double r = std::pow(10.0, -2.0 - k);
    EvalPoint p = context(P, x, w0, w, {});
    p.u = w / r;
    values.push_back(r * P.l1->eval(p));
  }
  return extrapolate_limit(values);
}

double lagrangian_e(const StrictProblem& P, const Eigen::VectorXd& y, double w0, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& a) {
  double l = recession_l1(P, y, w0, w);
  if (P.l0 && w0 != 0.0) l += w0 * P.l0->eval(context(P, y, w0, w, a));
  return l;
}

Eigen::VectorXd drift_e(const StrictProblem& P, const Eigen::VectorXd& y, double w0, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& a) {
  const EvalPoint ctx = context(P, y, w0, w, a);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(P.n);
  if (w0 != 0.0) F += w0 * P.f.eval(y, ctx);
  for (int i = 0; i < P.m; ++i) {
    if (w[i] != 0.0) F += w[i] * P.g[i].eval(y, ctx);
  }
  return F;
}

Eigen::VectorXd extended_dynamics(const StrictProblem& P, const Eigen::VectorXd& y, double w0,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& a) {
  Eigen::VectorXd d(state_size(P));
  d[0] = w0;
  d.segment(1, P.n) = drift_e(P, y, w0, w, a);
  d[P.n + 1] = lagrangian_e(P, y, w0, w, a);
  d[P.n + 2] = control_norm(P, w);
  return d;
}

double hamiltonian(const StrictProblem& P, const Eigen::VectorXd& y, double p0, const Eigen::VectorXd& p,
                   double lambda, double pi, double w0, const Eigen::VectorXd& w, const Eigen::VectorXd& a) {
  double h = p0 * w0 + p.dot(drift_e(P, y, w0, w, a));
  if (lambda != 0.0) h -= lambda * lagrangian_e(P, y, w0, w, a);
  if (pi != 0.0) h += pi * control_norm(P, w);
  return h;
}

double extended_cost(const StrictProblem& P, const Eigen::VectorXd& e) {
  return P.psi.eval(e.head(P.n + 1))[0] + e[P.n + 1];
}

double target_violation(const StrictProblem& P, const Eigen::VectorXd& e) {
  EvalPoint p;
  p.t = e[0];
  p.x = e.segment(1, P.n);
  double v = 0.0;
  bool first = true;
  for (const auto& c : P.target_constraints) {
    const double x = c.eval(p);
    v = first ? x : std::max(v, x);
    first = false;
  }
  return v;
}

int SelectionPolicy::lookup(const std::string& key) const {
  const auto it = entries.find(key);
  return it == entries.end() ? 0 : it->second;
}

std::vector<ExtendedJacobian> extended_jacobians(const StrictProblem& P, const Eigen::VectorXd& y, double w0,
                                                 const Eigen::VectorXd& w, const Eigen::VectorXd& a,
                                                 const JacobianQuery& query) {
  const EvalPoint ctx = context(P, y, w0, w, a);
  struct Block {
    std::string name;
    int first_component;  // in the stacked field
    int rows;
    double weight;
    bool lagrangian;
  };
  std::vector<Expr> comps;
  std::vector<Block> blocks;
  auto add_field = [&](const std::string& name, const std::vector<Expr>& exprs, double weight, bool lag) {
    blocks.push_back({name, static_cast<int>(comps.size()), static_cast<int>(exprs.size()), weight, lag});
    comps.insert(comps.end(), exprs.begin(), exprs.end());
  };
  if (w0 != 0.0) add_field("f", P.f.components(), w0, false);
  for (int i = 0; i < P.m; ++i) {
    if (w[i] != 0.0) add_field("g" + std::to_string(i + 1), P.g[i].components(), w[i], false);
  }
  if (P.l0 && w0 != 0.0) add_field("l0", {*P.l0}, w0, true);
  if (P.recession) {
    add_field("l1", {*P.recession}, 1.0, true);
  } else if (P.l1 && w0 > 0.0) {
    add_field("l1", {*P.l1}, w0, true);
  }

  // r * grad l1(x, w / r) as r -> 0, for impulsive pieces without an explicit recession.
  Eigen::VectorXd numeric_omega = Eigen::VectorXd::Zero(P.n);
  if (!P.recession && P.l1 && w0 == 0.0 && !w.isZero(0.0)) {
    const auto coords = NonsmoothField::state_coords(P.n);
    std::vector<Eigen::VectorXd> grads;
    for (int k = 0; k < 7; ++k) {
      const double r = std::pow(10.0, -2.0 - k);
      EvalPoint p = ctx;
      p.u = w / r;
      Eigen::VectorXd g(P.n);
      P.l1->eval_gradient(p, coords, g);
      grads.push_back(r * g);
    }
    for (int j = 0; j < P.n; ++j) {
      std::vector<double> v;
      for (const auto& g : grads) v.push_back(g[j]);
      numeric_omega[j] = extrapolate_limit(v);
    }
  }

  if (comps.empty()) {
    ExtendedJacobian ej{Eigen::MatrixXd::Zero(P.n, P.n), numeric_omega, {}};
    return {ej};
  }
  const NonsmoothField stacked(comps, NonsmoothField::state_coords(P.n));
  PatternOptions opts;
  opts.kink_tol = query.kink_tol;
  opts.cap = query.cap;
  opts.seed = query.seed;
  const auto patterns = sign_patterns(stacked, y, query.radius, ctx, opts);

  // Flattened abs ordinal of each stacked component's first abs node, per block.
  std::vector<int> flat_offset(comps.size(), 0);
  std::vector<int> block_of(comps.size(), 0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    int acc = 0;
    for (int r = 0; r < blocks[b].rows; ++r) {
      const int c = blocks[b].first_component + r;
      flat_offset[c] = acc;
      block_of[c] = static_cast<int>(b);
      acc += comps[c].kink_count();
    }
  }

  std::vector<ExtendedJacobian> out;
  for (const auto& pj : patterns) {
    ExtendedJacobian ej;
    ej.M = Eigen::MatrixXd::Zero(P.n, P.n);
    ej.omega = numeric_omega;
    for (const auto& b : blocks) {
      if (b.lagrangian) {
        ej.omega += b.weight * pj.jacobian.row(b.first_component).transpose();
      } else {
        ej.M += b.weight * pj.jacobian.middleRows(b.first_component, b.rows);
      }
    }
    for (std::size_t k = 0; k < pj.pattern.kinks.size(); ++k) {
      const auto& id = pj.pattern.kinks[k];
      const std::string key = blocks[block_of[id.component]].name + ":" +
                              std::to_string(flat_offset[id.component] + id.ordinal);
      ej.signs.emplace_back(key, pj.pattern.signs[k]);
    }
    out.push_back(std::move(ej));
  }
  return out;
}

ExtendedJacobian select_jacobian(const std::vector<ExtendedJacobian>& all, const SelectionPolicy& policy,
                                 bool* consistent) {
  std::vector<const ExtendedJacobian*> keep;
  for (const auto& ej : all) {
    bool ok = true;
    for (const auto& [key, sign] : ej.signs) {
      const int want = policy.lookup(key);
      if (want != 0 && want != sign) ok = false;
    }
    if (ok) keep.push_back(&ej);
  }
  if (consistent) *consistent = !keep.empty();
  if (keep.empty()) {
    for (const auto& ej : all) keep.push_back(&ej);
  }
  ExtendedJacobian sel;
  sel.M = Eigen::MatrixXd::Zero(all.front().M.rows(), all.front().M.cols());
  sel.omega = Eigen::VectorXd::Zero(all.front().omega.size());
  for (const auto* ej : keep) {
    sel.M += ej->M;
    sel.omega += ej->omega;
  }
  sel.M /= static_cast<double>(keep.size());
  sel.omega /= static_cast<double>(keep.size());
  return sel;
}

std::vector<std::string> kink_keys(const std::vector<ExtendedJacobian>& all) {
  std::vector<std::string> keys;
  for (const auto& ej : all) {
    for (const auto& [key, sign] : ej.signs) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace goh
