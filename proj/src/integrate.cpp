#include "goh/integrate.hpp"

#include "goh/hull.hpp"
#include "goh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace goh {

namespace {

Eigen::VectorXd hermite(const Eigen::VectorXd& y0, const Eigen::VectorXd& d0, const Eigen::VectorXd& y1,
                        const Eigen::VectorXd& d1, double h, double tau) {
  const double t2 = tau * tau;
  const double t3 = t2 * tau;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + tau) * h * d0 + (-2 * t3 + 3 * t2) * y1 +
         (t3 - t2) * h * d1;
}

Eigen::VectorXd hermite_derivative(const Eigen::VectorXd& y0, const Eigen::VectorXd& d0,
                                   const Eigen::VectorXd& y1, const Eigen::VectorXd& d1, double h, double tau) {
  const double t2 = tau * tau;
  return ((6 * t2 - 6 * tau) * y0 + (6 * tau - 6 * t2) * y1) / h + (3 * t2 - 4 * tau + 1) * d0 +
         (3 * t2 - 2 * tau) * d1;
}

int step_count(double len, const IntegrateOptions& opts) {
  const double by_rel = std::ceil(1.0 / opts.rel_step);
  const double by_abs = std::ceil(len / opts.max_step);
  return static_cast<int>(std::max({1.0, by_rel, by_abs}));
}

ExtendedJacobian selection_at(const StrictProblem& P, const Trajectory& traj, int piece, double s,
                              const SelectionPolicy& policy, const JacobianQuery& query, bool& consistent,
                              std::vector<ExtendedJacobian>* all_out = nullptr) {
  const auto [w0, w] = effective_rates(traj.controls[piece]);
  const auto all = extended_jacobians(P, traj.state(P, s), w0, w, traj.controls[piece].alpha, query);
  bool ok = true;
  ExtendedJacobian sel = select_jacobian(all, policy, &ok);
  consistent = consistent && ok;
  if (all_out) *all_out = all;
  return sel;
}

}  // namespace

double Trajectory::S() const { return schedule_length(controls); }

Eigen::VectorXd Trajectory::at(double s) const {
  const int i = piece_index(controls, s);
  const Segment& seg = segments[i];
  const int last = static_cast<int>(seg.y.size()) - 1;
  if (last == 0) return seg.y.front();
  int k = static_cast<int>(std::floor((s - seg.s0) / seg.h));
  k = std::clamp(k, 0, last - 1);
  const double tau = std::clamp((s - (seg.s0 + k * seg.h)) / seg.h, 0.0, 1.0);
  return hermite(seg.y[k], seg.dy[k], seg.y[k + 1], seg.dy[k + 1], seg.h, tau);
}

std::vector<double> Trajectory::sample_grid(int per_unit) const {
  const double S_ = S();
  const int count = std::max(1, static_cast<int>(std::ceil(S_ * per_unit)));
  std::vector<double> g;
  for (int k = 0; k <= count; ++k) g.push_back(S_ * k / count);
  for (double b : breakpoints(controls)) g.push_back(b);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end(), [](double a, double b) { return std::abs(a - b) < 1e-15; }), g.end());
  return g;
}

std::pair<double, Eigen::VectorXd> effective_rates(const ControlPiece& piece) {
  const double c = 1.0 + piece.zeta;
  return {c * piece.w0, c * piece.w};
}

Eigen::VectorXd initial_state(const StrictProblem& P) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(state_size(P));
  y.segment(1, P.n) = P.x0;
  return y;
}

Trajectory solve_forward(const StrictProblem& P, const ControlSchedule& ctrl, const Eigen::VectorXd& y_init,
                         const IntegrateOptions& opts) {
  if (y_init.size() != state_size(P)) throw std::invalid_argument("initial state has the wrong size");
  Trajectory traj;
  traj.controls = ctrl;
  Eigen::VectorXd Y = y_init;
  double s0 = 0.0;
  for (const auto& piece : ctrl) {
    if (!(piece.duration > 0.0) || !std::isfinite(piece.duration)) {
      throw std::invalid_argument("piece durations must be positive and finite");
    }
    const auto [w0, w] = effective_rates(piece);
    auto rhs = [&](const Eigen::VectorXd& z) { return extended_dynamics(P, z.segment(1, P.n), w0, w, piece.alpha); };
    const int steps = step_count(piece.duration, opts);
    Trajectory::Segment seg;
    seg.s0 = s0;
    seg.h = piece.duration / steps;
    seg.y.reserve(steps + 1);
    seg.dy.reserve(steps + 1);
    seg.y.push_back(Y);
    seg.dy.push_back(rhs(Y));
    const double h = seg.h;
    for (int k = 0; k < steps; ++k) {
      const Eigen::VectorXd& k1 = seg.dy.back();
      const Eigen::VectorXd k2 = rhs(Y + 0.5 * h * k1);
      const Eigen::VectorXd k3 = rhs(Y + 0.5 * h * k2);
      const Eigen::VectorXd k4 = rhs(Y + h * k3);
      Y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!Y.allFinite() || Y.lpNorm<Eigen::Infinity>() > opts.blowup) {
        throw std::runtime_error("trajectory blow-up at s = " + format_number(s0 + (k + 1) * h));
      }
      seg.y.push_back(Y);
      seg.dy.push_back(rhs(Y));
    }
    s0 += piece.duration;
    traj.segments.push_back(std::move(seg));
  }
  return traj;
}

Trajectory extend_process(const StrictProblem& P, const StrictProcess& sp, const std::vector<double>& rates,
                          const IntegrateOptions& opts) {
  return solve_forward(P, extend_controls(P, sp, rates), initial_state(P), opts);
}

Eigen::MatrixXd fundamental_matrix(const std::function<Eigen::MatrixXd(double)>& M, double s1, double s2,
                                   int steps) {
  const Eigen::MatrixXd M1 = M(s1);
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(M1.rows(), M1.cols());
  if (steps <= 0 || s1 == s2) return V;
  const double h = (s2 - s1) / steps;
  Eigen::MatrixXd Ma = M1;
  for (int k = 0; k < steps; ++k) {
    const double s = s1 + k * h;
    const Eigen::MatrixXd Mm = M(s + 0.5 * h);
    const Eigen::MatrixXd Mb = M(s + h);
    const Eigen::MatrixXd k1 = Ma * V;
    const Eigen::MatrixXd k2 = Mm * (V + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = Mm * (V + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = Mb * (V + h * k3);
    V += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ma = Mb;
  }
  return V;
}

Costate Costate::analytic(std::vector<Expr> components) {
  Costate c;
  c.analytic_ = true;
  c.exprs_ = std::move(components);
  return c;
}

Costate Costate::sampled(std::vector<double> s, std::vector<Eigen::VectorXd> p, std::vector<Eigen::VectorXd> dp) {
  if (s.empty() || s.size() != p.size() || s.size() != dp.size()) {
    throw std::invalid_argument("sampled costate needs matching nonempty node lists");
  }
  Costate c;
  c.analytic_ = false;
  c.s_ = std::move(s);
  c.p_ = std::move(p);
  c.dp_ = std::move(dp);
  return c;
}

Costate Costate::zero(int n) { return analytic(std::vector<Expr>(n, Expr::constant(0.0))); }

int Costate::size() const {
  return analytic_ ? static_cast<int>(exprs_.size()) : static_cast<int>(p_.front().size());
}

Eigen::VectorXd Costate::at(double s) const {
  if (analytic_) {
    EvalPoint pt;
    pt.s = s;
    Eigen::VectorXd v(exprs_.size());
    for (std::size_t i = 0; i < exprs_.size(); ++i) v[i] = exprs_[i].eval(pt);
    return v;
  }
  if (s <= s_.front()) return p_.front();
  if (s >= s_.back()) return p_.back();
  std::size_t k = std::upper_bound(s_.begin(), s_.end(), s) - s_.begin() - 1;
  const double h = s_[k + 1] - s_[k];
  if (h <= 0.0) return p_[k + 1];
  return hermite(p_[k], dp_[k], p_[k + 1], dp_[k + 1], h, (s - s_[k]) / h);
}

Eigen::VectorXd Costate::derivative(double s) const {
  if (analytic_) {
    EvalPoint pt;
    pt.s = s;
    const VarRef coord{VarKind::s, 0};
    Eigen::VectorXd v(exprs_.size());
    Eigen::VectorXd g(1);
    for (std::size_t i = 0; i < exprs_.size(); ++i) {
      exprs_[i].eval_gradient(pt, std::span<const VarRef>(&coord, 1), g);
      v[i] = g[0];
    }
    return v;
  }
  if (s <= s_.front()) return dp_.front();
  if (s >= s_.back()) return dp_.back();
  std::size_t k = std::upper_bound(s_.begin(), s_.end(), s) - s_.begin() - 1;
  const double h = s_[k + 1] - s_[k];
  if (h <= 0.0) return dp_[k + 1];
  return hermite_derivative(p_[k], dp_[k], p_[k + 1], dp_[k + 1], h, (s - s_[k]) / h);
}

AdjointPropagator adjoint_propagator(const StrictProblem& P, const Trajectory& traj, const SelectionPolicy& policy,
                                     const AdjointOptions& opts) {
  const int n = P.n;
  const int N = std::max(1, opts.steps_per_piece);
  const auto bp = breakpoints(traj.controls);
  const int pieces = static_cast<int>(traj.controls.size());

  // Backward sweep; nodes are collected in reverse and flipped at the end.
  AdjointPropagator out;
  Eigen::MatrixXd U = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (int i = pieces - 1; i >= 0; --i) {
    const double h = (bp[i + 1] - bp[i]) / N;
    // Selections at every half node of the piece.
    std::vector<ExtendedJacobian> sel(2 * N + 1);
    std::vector<std::vector<ExtendedJacobian>> all(N + 1);
    for (int k = 0; k <= 2 * N; ++k) {
      const double s = bp[i] + 0.5 * k * h;
      bool ok = true;
      sel[k] = selection_at(P, traj, i, s, policy, opts.query, ok, k % 2 == 0 ? &all[k / 2] : nullptr);
      out.consistent = out.consistent && ok;
    }
    auto dU = [&](const Eigen::MatrixXd& u, int k) -> Eigen::MatrixXd { return -u * sel[k].M; };
    auto dq = [&](const Eigen::VectorXd& v, int k) -> Eigen::VectorXd {
      return -(v.transpose() * sel[k].M).transpose() + sel[k].omega;
    };
    auto push = [&](int node) {
      out.s.push_back(bp[i] + node * h);
      out.U.push_back(U);
      out.q.push_back(q);
      out.limits.push_back(all[node]);
      out.selected.push_back(sel[2 * node]);
      out.piece.push_back(i);
    };
    push(N);
    for (int k = N; k > 0; --k) {
      // RK4 from s_k to s_{k-1} with step -h.
      const int a = 2 * k, m = 2 * k - 1, b = 2 * k - 2;
      const Eigen::MatrixXd u1 = dU(U, a);
      const Eigen::VectorXd q1 = dq(q, a);
      const Eigen::MatrixXd u2 = dU(U - 0.5 * h * u1, m);
      const Eigen::VectorXd q2 = dq(q - 0.5 * h * q1, m);
      const Eigen::MatrixXd u3 = dU(U - 0.5 * h * u2, m);
      const Eigen::VectorXd q3 = dq(q - 0.5 * h * q2, m);
      const Eigen::MatrixXd u4 = dU(U - h * u3, b);
      const Eigen::VectorXd q4 = dq(q - h * q3, b);
      U -= h / 6.0 * (u1 + 2.0 * u2 + 2.0 * u3 + u4);
      q -= h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
      push(k - 1);
    }
  }
  std::reverse(out.s.begin(), out.s.end());
  std::reverse(out.U.begin(), out.U.end());
  std::reverse(out.q.begin(), out.q.end());
  std::reverse(out.limits.begin(), out.limits.end());
  std::reverse(out.selected.begin(), out.selected.end());
  std::reverse(out.piece.begin(), out.piece.end());
  return out;
}

AdjointResult solve_adjoint(const AdjointPropagator& prop, const Eigen::VectorXd& p_final, double lambda) {
  AdjointResult res;
  res.consistent = prop.consistent;
  std::vector<Eigen::VectorXd> p, dp;
  for (std::size_t k = 0; k < prop.s.size(); ++k) {
    const Eigen::VectorXd pk = (p_final.transpose() * prop.U[k]).transpose() + lambda * prop.q[k];
    const auto& sel = prop.selected[k];
    const Eigen::VectorXd dk = -(pk.transpose() * sel.M).transpose() + lambda * sel.omega;
    std::vector<Eigen::VectorXd> pts;
    for (const auto& lim : prop.limits[k]) pts.push_back(-(pk.transpose() * lim.M).transpose() + lambda * lim.omega);
    const double r = (project_to_hull(pts, dk) - dk).norm();
    if (r > res.max_residual) {
      res.max_residual = r;
      res.argmax_s = prop.s[k];
    }
    p.push_back(pk);
    dp.push_back(dk);
  }
  res.p = Costate::sampled(prop.s, std::move(p), std::move(dp));
  return res;
}

AdjointResult solve_adjoint(const StrictProblem& P, const Trajectory& traj, const Eigen::VectorXd& p_final,
                            double lambda, const SelectionPolicy& policy, const AdjointOptions& opts) {
  if (p_final.size() != P.n || !p_final.allFinite() || !std::isfinite(lambda)) {
    throw std::invalid_argument("terminal costate must be a finite n-vector");
  }
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  return solve_adjoint(adjoint_propagator(P, traj, policy, opts), p_final, lambda);
}

MembershipResidual verify_adjoint_membership(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                                             const std::vector<double>& grid, const JacobianQuery& query,
                                             int jobs) {
  std::vector<double> r(grid.size(), 0.0);
  parallel_for(static_cast<int>(grid.size()), jobs, [&](int k) {
    const double s = grid[k];
    const int i = piece_index(traj.controls, s);
    const auto [w0, w] = effective_rates(traj.controls[i]);
    const auto all = extended_jacobians(P, traj.state(P, s), w0, w, traj.controls[i].alpha, query);
    const Eigen::VectorXd p = mult.p.at(s);
    const Eigen::VectorXd target = -mult.p.derivative(s);
    std::vector<Eigen::VectorXd> pts;
    for (const auto& lim : all) pts.push_back((p.transpose() * lim.M).transpose() - mult.lambda * lim.omega);
    r[k] = (project_to_hull(pts, target) - target).norm();
  });
  MembershipResidual out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (r[k] > out.max_residual) {
      out.max_residual = r[k];
      out.argmax_s = grid[k];
    }
  }
  return out;
}

Eigen::MatrixXd transport_matrix(const StrictProblem& P, const Trajectory& traj, double s_k,
                                 const SelectionPolicy& policy, const AdjointOptions& opts) {
  const int n = P.n;
  const auto bp = breakpoints(traj.controls);
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n + 1, n + 1);
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double lo = std::max(bp[i], s_k);
    const double hi = bp[i + 1];
    if (hi <= lo) continue;
    const int piece = static_cast<int>(i);
    auto A = [&](double s) {
      bool ok = true;
      const auto sel = selection_at(P, traj, piece, std::clamp(s, lo, hi), policy, opts.query, ok);
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
      a.topLeftCorner(n, n) = sel.M;
      a.bottomLeftCorner(1, n) = sel.omega.transpose();
      return a;
    };
    const int steps = std::max(1, static_cast<int>(std::ceil(opts.steps_per_piece * (hi - lo) / (hi - bp[i]))));
    Phi = fundamental_matrix(A, lo, hi, steps) * Phi;
  }
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n + 2, n + 2);
  E.bottomRightCorner(n + 1, n + 1) = Phi;
  return E;
}

}  // namespace goh
