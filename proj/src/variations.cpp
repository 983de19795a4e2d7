#include "goh/variations.hpp"

#include "goh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace goh {

namespace {

constexpr double site_tol = 1e-12;

// Pieces of ctrl clipped to [lo, hi].
ControlSchedule clip(const ControlSchedule& ctrl, double lo, double hi) {
  ControlSchedule out;
  double a = 0.0;
  for (const auto& p : ctrl) {
    const double b = a + p.duration;
    const double l = std::max(a, lo);
    const double h = std::min(b, hi);
    if (h - l > 0.0) {
      ControlPiece q = p;
      q.duration = h - l;
      out.push_back(std::move(q));
    }
    a = b;
  }
  return out;
}

ControlSchedule splice(const ControlSchedule& ctrl, double lo, double hi, const ControlSchedule& insert) {
  ControlSchedule out = clip(ctrl, 0.0, lo);
  out.insert(out.end(), insert.begin(), insert.end());
  const ControlSchedule tail = clip(ctrl, hi, schedule_length(ctrl));
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

// Needle site after moving off breakpoints.
double needle_site(const ControlSchedule& ctrl, double s, std::string* warning) {
  const auto bp = breakpoints(ctrl);
  const double scale = std::max(1.0, bp.back());
  for (std::size_t k = 1; k < bp.size(); ++k) {
    if (std::abs(s - bp[k]) <= site_tol * scale) {
      const double cell = ctrl[k - 1].duration * IntegrateOptions{}.rel_step;
      if (warning) {
        *warning = "needle site " + format_number(s) + " is a breakpoint; moved to " + format_number(bp[k] - cell);
      }
      return bp[k] - cell;
    }
  }
  return s;
}

Eigen::VectorXd alpha_at(const ControlSchedule& ctrl, double s) { return ctrl[piece_index(ctrl, s)].alpha; }

}  // namespace

double window_width(const Generator& c, double eps) {
  return std::holds_alternative<Needle>(c) ? eps : 8.0 * std::sqrt(eps);
}

ControlSchedule apply_needle(const ControlSchedule& ctrl, double s, const Needle& c, double eps,
                             std::string* warning) {
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
  if (eps == 0.0) return ctrl;
  const double S = schedule_length(ctrl);
  if (s <= 0.0 || s > S * (1 + site_tol)) throw std::invalid_argument("needle site outside (0, S]");
  s = needle_site(ctrl, std::min(s, S), warning);
  if (eps >= s) throw std::invalid_argument("needle needs eps < s");
  ControlPiece p;
  p.duration = eps;
  p.w0 = c.w0;
  p.w = c.w;
  p.alpha = c.a.size() > 0 ? c.a : alpha_at(ctrl, s);
  p.zeta = c.zeta;
  return splice(ctrl, s - eps, s, {p});
}

ControlSchedule apply_bracket(const ControlSchedule& ctrl, double s, const Bracket& c, double eps) {
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
  if (eps == 0.0) return ctrl;
  const int m = static_cast<int>(ctrl.front().w.size());
  if (c.i < 0 || c.j < 0 || c.i >= m || c.j >= m || c.i == c.j) {
    throw std::invalid_argument("bracket needs two distinct control indices");
  }
  const double r = std::sqrt(eps);
  if (8.0 * r > s * (1 + site_tol)) throw std::invalid_argument("bracket needs 8 sqrt(eps) <= s");
  if (s > schedule_length(ctrl) * (1 + site_tol)) throw std::invalid_argument("bracket site outside (0, S]");
  const double lo = std::max(0.0, s - 8.0 * r);
  ControlSchedule insert = clip(ctrl, lo, s);
  for (auto& p : insert) {
    p.duration *= 0.5;
    p.w0 *= 2.0;
    p.w *= 2.0;
  }
  const Eigen::VectorXd alpha = alpha_at(ctrl, s);
  auto leg = [&](int k, double sign) {
    ControlPiece p;
    p.duration = r;
    p.w0 = 0.0;
    p.w = sign * Eigen::VectorXd::Unit(m, k);
    p.alpha = alpha;
    return p;
  };
  if (c.reversed) {
    for (auto p : {leg(c.j, -1), leg(c.i, -1), leg(c.j, 1), leg(c.i, 1)}) insert.push_back(p);
  } else {
    for (auto p : {leg(c.i, 1), leg(c.j, 1), leg(c.i, -1), leg(c.j, -1)}) insert.push_back(p);
  }
  return splice(ctrl, lo, s, insert);
}

ControlSchedule apply_variation(const ControlSchedule& ctrl, const Variation& v, double eps, std::string* warning) {
  if (const auto* n = std::get_if<Needle>(&v.c)) return apply_needle(ctrl, v.s, *n, eps, warning);
  return apply_bracket(ctrl, v.s, std::get<Bracket>(v.c), eps);
}

VariationVector variation_vector(const StrictProblem& P, const Trajectory& traj, double s, const Generator& c,
                                 JacobianMethod method, const JacobianParams& params) {
  const int k = piece_index(traj.controls, s);
  const ControlPiece& ref = traj.controls[k];
  const Eigen::VectorXd y = traj.state(P, s);
  VariationVector out;
  if (const auto* n = std::get_if<Needle>(&c)) {
    const auto [rw0, rw] = effective_rates(ref);
    const double f = 1.0 + n->zeta;
    const Eigen::VectorXd a = n->a.size() > 0 ? n->a : ref.alpha;
    Eigen::VectorXd v(P.n + 2);
    v[0] = f * n->w0 - rw0;
    v.segment(1, P.n) = drift_e(P, y, f * n->w0, f * n->w, a) - drift_e(P, y, rw0, rw, ref.alpha);
    v[P.n + 1] = lagrangian_e(P, y, f * n->w0, f * n->w, a) - lagrangian_e(P, y, rw0, rw, ref.alpha);
    out.V = ConvexHullSet::from_vectors({v});
    out.v_nu = f * control_norm(P, n->w) - control_norm(P, rw);
    return out;
  }
  const auto& b = std::get<Bracket>(c);
  if (b.i < 0 || b.j < 0 || b.i >= P.m1 || b.j >= P.m1 || b.i == b.j) {
    throw std::invalid_argument("bracket indices must be distinct and at most m1");
  }
  EvalPoint ctx;
  ctx.a = ref.alpha;
  ConvexHullSet br = setvalued_bracket(P.g[b.i], P.g[b.j], y, method, params, ctx);
  if (b.reversed) br = br.negated();
  std::vector<Eigen::VectorXd> verts;
  for (const auto& v : br.vertices()) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(P.n + 2);
    e.segment(1, P.n) = v;
    verts.push_back(std::move(e));
  }
  out.V = ConvexHullSet::from_vectors(std::move(verts));
  out.V.method = br.method;
  return out;
}

Eigen::VectorXd endpoint_map(const StrictProblem& P, const ControlSchedule& ctrl, const std::vector<Variation>& vars,
                             const std::vector<double>& eps, const IntegrateOptions& opts) {
  if (vars.size() != eps.size()) throw std::invalid_argument("one eps per variation");
  std::vector<int> order(vars.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return vars[a].s < vars[b].s; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = vars[order[k - 1]];
    const auto& next = vars[order[k]];
    if (eps[order[k]] > 0 && eps[order[k - 1]] > 0 &&
        prev.s > next.s - window_width(next.c, eps[order[k]]) + site_tol) {
      throw std::invalid_argument("variation windows overlap");
    }
  }
  ControlSchedule c = ctrl;
  for (int k : order) c = apply_variation(c, vars[k], eps[k]);
  return solve_forward(P, c, initial_state(P), opts).endpoint();
}

std::vector<QdqColumn> qdq_oracle(const StrictProblem& P, const ControlSchedule& ctrl,
                                  const std::vector<Variation>& vars, const std::vector<double>& eps_schedule,
                                  const QdqOptions& opts) {
  std::vector<double> eps = eps_schedule;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const Trajectory traj = solve_forward(P, ctrl, initial_state(P), opts.integrate);
  const Eigen::VectorXd Y0 = traj.endpoint().head(P.n + 2);

  std::vector<QdqColumn> cols(vars.size());
  for (std::size_t k = 0; k < vars.size(); ++k) {
    QdqColumn& col = cols[k];
    col.eps = eps;
    col.s = vars[k].s;
    if (std::holds_alternative<Needle>(vars[k].c)) col.s = needle_site(ctrl, vars[k].s, &col.warning);
    const VariationVector V = variation_vector(P, traj, col.s, vars[k].c, opts.method, opts.params);
    const Eigen::MatrixXd E = transport_matrix(P, traj, col.s, {}, opts.transport);
    std::vector<Eigen::VectorXd> moved;
    for (const auto& v : V.V.vertices()) moved.push_back(E * v);
    col.transported = ConvexHullSet::from_vectors(std::move(moved));
    col.quotient.assign(eps.size(), Eigen::VectorXd());
    col.distance.assign(eps.size(), 0.0);
  }

  const int count = static_cast<int>(vars.size() * eps.size());
  parallel_for(count, opts.jobs, [&](int idx) {
    const std::size_t k = idx / eps.size();
    const std::size_t e = idx % eps.size();
    const Eigen::VectorXd Y = endpoint_map(P, ctrl, {vars[k]}, {eps[e]}, opts.integrate).head(P.n + 2);
    cols[k].quotient[e] = (Y - Y0) / eps[e];
    cols[k].distance[e] = hull_distance(cols[k].transported, cols[k].quotient[e]);
  });

  const double noise = opts.floor * (1.0 + Y0.lpNorm<Eigen::Infinity>());
  for (auto& col : cols) {
    auto at_floor = [&](std::size_t e) { return col.distance[e] * col.eps[e] <= noise; };
    col.decreasing = col.eps.size() >= 3;
    for (std::size_t e = 1; e < col.eps.size(); ++e) {
      if (col.distance[e] > col.distance[e - 1] && !at_floor(e)) col.decreasing = false;
    }
    if (col.eps.size() < 3 && col.warning.empty()) col.warning = "trend test needs at least three eps values";
    // Least-squares slope of log distance against log eps.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t e = 0; e < col.eps.size(); ++e) {
      if (at_floor(e)) continue;
      const double x = std::log(col.eps[e]);
      const double y = std::log(col.distance[e]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
    if (cnt >= 2 && cnt * sxx - sx * sx > 0) col.rate = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    col.pass = col.decreasing && !col.distance.empty() && col.distance.back() < opts.tol;
  }
  return cols;
}

}  // namespace goh
