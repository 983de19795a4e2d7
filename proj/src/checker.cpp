#include "goh/checker.hpp"

#include "goh/lp.hpp"
#include "goh/parallel.hpp"
#include "goh/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <tuple>

namespace goh {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json result_json(const ConditionResult& r) {
  json j = r.detail;
  j["verdict"] = to_string(r.verdict);
  j["residual"] = r.residual;
  return j;
}

struct SlicePoint {
  double w0;
  Eigen::VectorXd w;
  Eigen::VectorXd a;
};

// Extreme directions of the slice w0 + |w| = 1 (times the corners of A) and
// quasi-random interior points.
std::vector<SlicePoint> slice_points(const StrictProblem& P, int count, std::uint64_t seed) {
  const Eigen::MatrixXd gens = P.C.spanning_matrix();
  std::vector<Eigen::VectorXd> corners;
  const int q = P.q;
  if (q <= 4) {
    for (int mask = 0; mask < (1 << q); ++mask) {
      Eigen::VectorXd a(q);
      for (int i = 0; i < q; ++i) a[i] = (mask >> i & 1) ? P.a_upper[i] : P.a_lower[i];
      corners.push_back(a);
    }
  } else {
    corners = {P.a_lower, P.a_upper, 0.5 * (P.a_lower + P.a_upper)};
  }
  std::vector<SlicePoint> pts;
  for (const auto& a : corners) {
    pts.push_back({1.0, Eigen::VectorXd::Zero(P.m), a});
    for (int j = 0; j < gens.cols(); ++j) {
      const double nrm = control_norm(P, gens.col(j));
      if (nrm > 0) pts.push_back({0.0, gens.col(j) / nrm, a});
    }
  }
  const int dims = 1 + static_cast<int>(gens.cols()) + q;
  Rng rng(derive_seed(seed, 0x736c696365));
  for (int k = 0; k < count; ++k) {
    std::vector<double> h(dims);
    for (int d = 0; d < dims; ++d) h[d] = d < 16 ? halton(k + 1, d) : rng.uniform();
    SlicePoint sp;
    sp.w0 = h[0];
    sp.w = Eigen::VectorXd::Zero(P.m);
    for (int j = 0; j < gens.cols(); ++j) sp.w += h[1 + j] * gens.col(j);
    const double nrm = control_norm(P, sp.w);
    if (nrm > 0) {
      sp.w *= (1.0 - sp.w0) / nrm;
    } else {
      sp.w0 = 1.0;
    }
    sp.a = Eigen::VectorXd(q);
    for (int i = 0; i < q; ++i) sp.a[i] = P.a_lower[i] + h[1 + gens.cols() + i] * (P.a_upper[i] - P.a_lower[i]);
    pts.push_back(std::move(sp));
  }
  return pts;
}

double sup_costate(const Costate& p, double S, int cells) {
  double sup = std::max(p.at(0).norm(), p.at(S).norm());
  for (double s : midpoint_grid(S, cells)) sup = std::max(sup, p.at(s).norm());
  return sup;
}

json provenance(const CheckConfig& cfg) {
  json j;
  j["tol_triv"] = cfg.tol_triv;
  j["tol_adj"] = cfg.tol_adj;
  j["tol_tr"] = cfg.tol_tr;
  j["tol_H"] = cfg.tol_H;
  j["tol_goh"] = cfg.tol_goh;
  j["tol_meas"] = cfg.tol_meas;
  j["tol_target"] = cfg.tol_target;
  j["grid"] = cfg.grid;
  j["slice_samples"] = cfg.slice_samples;
  j["jacobian_method"] = to_string(cfg.method);
  j["kink_tol"] = cfg.jac.kink_tol;
  j["pattern_cap"] = cfg.jac.cap;
  j["pattern_radius"] = cfg.jac.pattern_radius;
  j["seed"] = cfg.seed;
  j["rk4_rel_step"] = cfg.integrate.rel_step;
  j["rk4_max_step"] = cfg.integrate.max_step;
  j["adjoint_steps_per_piece"] = cfg.adjoint.steps_per_piece;
  return j;
}

Eigen::VectorXd extended_endpoint_tx(const StrictProblem& P, const Eigen::VectorXd& e) { return e.head(P.n + 1); }

void check_feasible(const StrictProblem& P, const Trajectory& traj, const CheckConfig& cfg) {
  const Eigen::VectorXd& e = traj.endpoint();
  const double viol = target_violation(P, e);
  if (viol > cfg.tol_target) {
    throw std::invalid_argument("infeasible candidate: endpoint violates the target by " + format_number(viol));
  }
  if (e[P.n + 2] > P.K + 1e-9) {
    throw std::invalid_argument("infeasible candidate: beta(S) = " + format_number(e[P.n + 2]) + " exceeds K");
  }
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "PASS";
    case Verdict::fail:
      return "FAIL";
    case Verdict::marginal:
      return "MARGINAL";
    case Verdict::skipped:
      return "SKIPPED";
  }
  return "?";
}

Verdict grade(double residual, double tol) {
  if (residual <= tol) return Verdict::pass;
  if (residual <= 10.0 * tol) return Verdict::marginal;
  return Verdict::fail;
}

std::vector<double> midpoint_grid(double S, int cells) {
  std::vector<double> g(cells);
  for (int k = 0; k < cells; ++k) g[k] = (k + 0.5) * S / cells;
  return g;
}

ConditionResult check_nontriviality(const Multipliers& mult, double S, const CheckConfig& cfg) {
  ConditionResult r;
  const double sup = sup_costate(mult.p, S, cfg.grid);
  const double size = std::abs(mult.p0) + sup + mult.lambda;
  r.verdict = size > cfg.tol_triv ? Verdict::pass : Verdict::fail;
  r.residual = size > cfg.tol_triv ? 0.0 : cfg.tol_triv - size;
  r.detail["magnitude"] = size;
  r.detail["sup_p"] = sup;
  return r;
}

ConditionResult check_transversality(const StrictProblem& P, const Eigen::VectorXd& endpoint, double p0,
                                     const Eigen::VectorXd& p_final, double lambda, const Multicone& target,
                                     const CheckConfig& cfg) {
  if (target.empty()) throw std::invalid_argument("target multicone is empty");
  const int d = P.n + 1;
  Eigen::VectorXd pv(d);
  pv << p0, p_final;
  const ConvexHullSet dpsi = clarke_jacobian(P.psi, extended_endpoint_tx(P, endpoint), JacobianMethod::enumeration, cfg.jac);
  const int K = dpsi.size();

  ConditionResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < target.size(); ++t) {
    const Eigen::MatrixXd xi = polar(target[t]).spanning_matrix();
    const int J = static_cast<int>(xi.cols());
    const int nv = K + J + 2 * d;
    lp::Problem prob(nv);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
    c.tail(2 * d).setOnes();
    prob.set_objective(c);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(nv);
    sum.head(K).setOnes();
    prob.add(sum, lp::Sense::eq, 1.0);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(nv);
      for (int k = 0; k < K; ++k) row[k] = lambda * dpsi.vertex(k)[i];
      for (int j = 0; j < J; ++j) row[K + j] = xi(i, j);
      row[K + J + i] = 1.0;
      row[K + J + d + i] = -1.0;
      prob.add(row, lp::Sense::eq, -pv[i]);
    }
    const auto res = prob.solve();
    if (res.status != lp::Status::optimal || res.objective >= best.residual) continue;
    best.residual = std::max(0.0, res.objective);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < K; ++k) m += res.x[k] * dpsi.vertex(k);
    const Eigen::VectorXd w = xi * res.x.segment(K, J);
    best.detail["cone"] = static_cast<int>(t);
    best.detail["dpsi_witness"] = vec_json(m);
    best.detail["xi"] = vec_json(w);
  }
  best.verdict = grade(best.residual, cfg.tol_tr);
  json dp = json::array();
  for (const auto& v : dpsi.vertices()) dp.push_back(vec_json(v));
  best.detail["dpsi_vertices"] = dp;
  best.detail["p_final"] = vec_json(pv);
  return best;
}

ConditionResult check_hamiltonian_max(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                                      const CheckConfig& cfg) {
  ConditionResult r;
  const double beta = traj.endpoint()[P.n + 2];
  if (beta < P.K && mult.pi != 0.0) {
    r.verdict = Verdict::fail;
    r.residual = std::abs(mult.pi);
    r.detail["reason"] = "pi must vanish when beta(S) < K";
    return r;
  }
  const auto slice = slice_points(P, cfg.slice_samples, cfg.seed);
  const auto grid = midpoint_grid(traj.S(), cfg.grid);
  std::vector<double> cand(grid.size()), top(grid.size());
  std::vector<int> arg(grid.size());
  parallel_for(static_cast<int>(grid.size()), cfg.jobs, [&](int k) {
    const double s = grid[k];
    const auto& piece = traj.controls[piece_index(traj.controls, s)];
    const Eigen::VectorXd y = traj.state(P, s);
    const Eigen::VectorXd p = mult.p.at(s);
    const auto [w0, w] = effective_rates(piece);
    cand[k] = hamiltonian(P, y, mult.p0, p, mult.lambda, mult.pi, w0, w, piece.alpha);
    top[k] = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < slice.size(); ++j) {
      const double h = hamiltonian(P, y, mult.p0, p, mult.lambda, mult.pi, slice[j].w0, slice[j].w, slice[j].a);
      if (h > top[k]) {
        top[k] = h;
        arg[k] = static_cast<int>(j);
      }
    }
  });
  double cand_max = 0.0, slice_max = -std::numeric_limits<double>::infinity();
  int kc = 0, ks = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(cand[k]) > cand_max) {
      cand_max = std::abs(cand[k]);
      kc = static_cast<int>(k);
    }
    if (top[k] > slice_max) {
      slice_max = top[k];
      ks = static_cast<int>(k);
    }
  }
  r.residual = std::max(cand_max, std::max(0.0, slice_max));
  r.verdict = grade(r.residual, cfg.tol_H);
  r.detail["candidate_max_abs"] = cand_max;
  r.detail["candidate_argmax_s"] = grid.empty() ? 0.0 : grid[kc];
  r.detail["slice_max"] = slice_max;
  if (!grid.empty()) {
    const auto& sp = slice[arg[ks]];
    r.detail["slice_argmax"] = {{"s", grid[ks]}, {"w0", sp.w0}, {"w", vec_json(sp.w)}, {"a", vec_json(sp.a)}};
  }
  r.detail["slice_points"] = static_cast<int>(slice.size());
  return r;
}

ConditionResult check_goh(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                          const CheckConfig& cfg) {
  ConditionResult r;
  const double beta = traj.endpoint()[P.n + 2];
  if (!(beta < P.K)) {
    r.verdict = Verdict::skipped;
    r.detail["reason"] = "beta(S) = K; the condition is not asserted";
    return r;
  }
  // The recession of l1 must vanish at w0 = 0.
  {
    Rng rng(derive_seed(cfg.seed, 0x726563));
    const Eigen::MatrixXd gens = P.C.spanning_matrix();
    for (int k = 0; k < 100 && gens.cols() > 0; ++k) {
      Eigen::VectorXd x(P.n);
      for (int i = 0; i < P.n; ++i) x[i] = P.x0[i] + (1.0 + std::abs(P.x0[i])) * rng.normal();
      Eigen::VectorXd w = Eigen::VectorXd::Zero(P.m);
      for (int j = 0; j < gens.cols(); ++j) w += rng.uniform() * gens.col(j);
      double v;
      try {
        v = recession_l1(P, x, 0.0, w);
      } catch (const std::runtime_error&) {
        v = std::numeric_limits<double>::infinity();
      }
      if (!(std::abs(v) < 1e-9)) {
        r.verdict = Verdict::skipped;
        r.detail["reason"] = "recession of l1 does not vanish at w0 = 0; the condition is not asserted";
        return r;
      }
    }
  }
  const auto grid = midpoint_grid(traj.S(), cfg.grid);
  json pairs = json::array();
  r.verdict = Verdict::pass;
  int pair_index = 0;
  for (int i = 0; i < P.m1; ++i) {
    for (int j = i + 1; j < P.m1; ++j, ++pair_index) {
      std::vector<Interval> iv(grid.size());
      std::vector<Membership> mem(grid.size());
      parallel_for(static_cast<int>(grid.size()), cfg.jobs, [&](int k) {
        const double s = grid[k];
        const auto& piece = traj.controls[piece_index(traj.controls, s)];
        EvalPoint ctx;
        ctx.a = piece.alpha;
        JacobianParams jp = cfg.jac;
        jp.seed = derive_seed(cfg.seed, pair_index, k);
        jp.jobs = 1;
        const auto B = setvalued_bracket(P.g[i], P.g[j], traj.state(P, s), cfg.method, jp, ctx);
        iv[k] = covector_interval(mult.p.at(s), B);
        mem[k] = goh_zero_membership(iv[k], cfg.tol_goh);
      });
      json table = json::array();
      int good = 0, marginal = 0;
      double worst = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (mem[k] != Membership::fails) ++good;
        if (mem[k] == Membership::marginal) ++marginal;
        worst = std::max(worst, std::max({iv[k].lo, -iv[k].hi, 0.0}));
        table.push_back({{"s", grid[k]}, {"lo", iv[k].lo}, {"hi", iv[k].hi}, {"membership", to_string(mem[k])}});
      }
      const double fraction = grid.empty() ? 1.0 : static_cast<double>(good) / grid.size();
      const bool ok = fraction >= 1.0 - cfg.tol_meas;
      if (!ok) r.verdict = Verdict::fail;
      r.residual = std::max(r.residual, worst);
      pairs.push_back({{"i", i + 1},
                       {"j", j + 1},
                       {"verdict", to_string(ok ? Verdict::pass : Verdict::fail)},
                       {"fraction_holding", fraction},
                       {"marginal_points", marginal},
                       {"intervals", table}});
    }
  }
  r.detail["pairs"] = pairs;
  return r;
}

std::pair<Multipliers, ConditionResult> resolve_multipliers(const StrictProblem& P, const Trajectory& traj,
                                                            const MultiplierSpec& spec, const CheckConfig& cfg) {
  if (!(spec.lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (!(spec.pi <= 0.0)) throw std::invalid_argument("pi must be nonpositive");
  Multipliers mult;
  mult.p0 = spec.p0;
  mult.lambda = spec.lambda;
  mult.pi = spec.pi;
  mult.policy = spec.policy;
  ConditionResult r;
  if (!spec.p.empty()) {
    if (static_cast<int>(spec.p.size()) != P.n) throw std::invalid_argument("p needs n components");
    mult.p = Costate::analytic(spec.p);
    const auto grid = midpoint_grid(traj.S(), cfg.grid);
    JacobianQuery q = cfg.adjoint.query;
    const auto m = verify_adjoint_membership(P, traj, mult, grid, q, cfg.jobs);
    r.residual = m.max_residual;
    r.detail["source"] = "expression";
    r.detail["argmax_s"] = m.argmax_s;
  } else if (spec.p_final) {
    const auto res = solve_adjoint(P, traj, *spec.p_final, spec.lambda, spec.policy, cfg.adjoint);
    mult.p = res.p;
    r.residual = res.max_residual;
    r.detail["source"] = "backward";
    r.detail["argmax_s"] = res.argmax_s;
    r.detail["policy_consistent"] = res.consistent;
    if (!res.consistent) r.detail["reason"] = "an explicit policy sign is not a feasible limit at some node";
  } else {
    throw std::invalid_argument("multipliers need p(s) or p(S)");
  }
  r.verdict = grade(r.residual, cfg.tol_adj);
  if (r.detail.contains("reason")) r.verdict = Verdict::fail;
  return {mult, r};
}

CheckReport run_full_check(const StrictProblem& P, const ControlSchedule& ctrl, const MultiplierSpec& spec,
                           const CheckConfig& cfg) {
  validate_schedule(P, ctrl);
  const Trajectory traj = solve_forward(P, ctrl, initial_state(P), cfg.integrate);
  check_feasible(P, traj, cfg);
  CheckReport rep;
  std::tie(rep.multipliers, rep.adjoint) = resolve_multipliers(P, traj, spec, cfg);
  const Multipliers& mult = rep.multipliers;
  const double S = traj.S();
  const Eigen::VectorXd& e = traj.endpoint();
  rep.nontriviality = check_nontriviality(mult, S, cfg);
  rep.transversality = check_transversality(P, e, mult.p0, mult.p.at(S), mult.lambda, P.target, cfg);
  rep.hamiltonian = check_hamiltonian_max(P, traj, mult, cfg);
  rep.goh = check_goh(P, traj, mult, cfg);

  const ConditionResult* all[] = {&rep.nontriviality, &rep.adjoint, &rep.transversality, &rep.hamiltonian, &rep.goh};
  rep.overall = Verdict::pass;
  for (const auto* c : all) {
    if (c->verdict == Verdict::fail) rep.overall = Verdict::fail;
    if (c->verdict == Verdict::marginal && rep.overall == Verdict::pass) rep.overall = Verdict::marginal;
  }

  json& j = rep.json;
  j["report_version"] = 1;
  j["overall"] = to_string(rep.overall);
  j["conditions"] = {{"i_nontriviality", result_json(rep.nontriviality)},
                     {"ii_adjoint", result_json(rep.adjoint)},
                     {"iii_transversality", result_json(rep.transversality)},
                     {"iv_hamiltonian", result_json(rep.hamiltonian)},
                     {"v_goh", result_json(rep.goh)}};
  j["endpoint"] = {{"S", S},
                   {"y0", e[0]},
                   {"y", vec_json(e.segment(1, P.n))},
                   {"yl", e[P.n + 1]},
                   {"beta", e[P.n + 2]},
                   {"cost", extended_cost(P, e)},
                   {"target_violation", target_violation(P, e)}};
  json pol = json::object();
  for (const auto& [k, v] : mult.policy.entries) pol[k] = v;
  j["multipliers"] = {{"p0", mult.p0},
                      {"lambda", mult.lambda},
                      {"pi", mult.pi},
                      {"p_initial", vec_json(mult.p.at(0))},
                      {"p_final", vec_json(mult.p.at(S))},
                      {"policy", pol}};
  j["provenance"] = provenance(cfg);
  return rep;
}

SearchResult search_multipliers(const StrictProblem& P, const ControlSchedule& ctrl, const CheckConfig& cfg,
                                const SearchConfig& search) {
  validate_schedule(P, ctrl);
  const Trajectory traj = solve_forward(P, ctrl, initial_state(P), cfg.integrate);
  check_feasible(P, traj, cfg);
  if (P.target.empty()) throw std::invalid_argument("target multicone is empty");
  const Eigen::VectorXd& e = traj.endpoint();
  const double S = traj.S();
  const bool pi_free = !(e[P.n + 2] < P.K);

  SearchResult out;
  // Kinks met along the trajectory decide the policy tables.
  const AdjointPropagator mid = adjoint_propagator(P, traj, {}, cfg.adjoint);
  for (const auto& lims : mid.limits) {
    for (const auto& k : kink_keys(lims)) {
      if (std::find(out.kink_keys.begin(), out.kink_keys.end(), k) == out.kink_keys.end()) out.kink_keys.push_back(k);
    }
  }
  std::sort(out.kink_keys.begin(), out.kink_keys.end());
  const int nk = static_cast<int>(out.kink_keys.size());
  if (nk > search.policy_kink_cap) {
    throw std::runtime_error("search space cap exceeded: " + std::to_string(nk) + " kinks give more than 2^" +
                             std::to_string(search.policy_kink_cap) + " policies");
  }
  std::vector<SelectionPolicy> policies{SelectionPolicy{}};
  for (int mask = 0; mask < (1 << nk) && nk > 0; ++mask) {
    SelectionPolicy p;
    for (int b = 0; b < nk; ++b) p.entries[out.kink_keys[b]] = (mask >> b & 1) ? 1 : -1;
    policies.push_back(std::move(p));
  }
  std::vector<AdjointPropagator> props(policies.size());
  parallel_for(static_cast<int>(policies.size()), cfg.jobs, [&](int i) {
    props[i] = i == 0 ? mid : adjoint_propagator(P, traj, policies[i], cfg.adjoint);
  });

  const ConvexHullSet dpsi = clarke_jacobian(P.psi, e.head(P.n + 1), JacobianMethod::enumeration, cfg.jac);

  // Enumerate (cone, dPsi vertex, simplex weights, pi, policy).
  struct Combo {
    int cone, vertex, policy;
    double lambda, pi;
    Eigen::VectorXd xi;
  };
  std::vector<Combo> combos;
  const int mesh = search.mesh;
  const std::vector<double> pis = [&] {
    std::vector<double> v{0.0};
    if (pi_free) {
      for (int k = 1; k <= mesh; ++k) v.push_back(-static_cast<double>(k) / mesh);
    }
    return v;
  }();
  for (std::size_t t = 0; t < P.target.size(); ++t) {
    const Eigen::MatrixXd gens = polar(P.target[t]).spanning_matrix();
    const int J = static_cast<int>(gens.cols());
    // Compositions of mesh into 1 + J nonnegative parts.
    std::vector<int> parts(J + 1, 0);
    std::function<void(int, int)> rec = [&](int idx, int left) {
      if (idx == J) {
        parts[J] = left;
        const double lambda = static_cast<double>(parts[J]) / mesh;
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(P.n + 1);
        for (int j = 0; j < J; ++j) xi += (static_cast<double>(parts[j]) / mesh) * gens.col(j);
        for (int v = 0; v < dpsi.size(); ++v) {
          for (double pi : pis) {
            for (std::size_t pol = 0; pol < policies.size(); ++pol) {
              combos.push_back({static_cast<int>(t), v, static_cast<int>(pol), lambda, pi, xi});
              if (static_cast<int>(combos.size()) > search.max_combinations) {
                throw std::runtime_error("search space cap exceeded: more than " +
                                         std::to_string(search.max_combinations) + " combinations");
              }
            }
          }
        }
        return;
      }
      for (int k = 0; k <= left; ++k) {
        parts[idx] = k;
        rec(idx + 1, left - k);
      }
    };
    rec(0, mesh);
  }
  out.explored = static_cast<long>(combos.size());

  CheckConfig coarse = cfg;
  coarse.grid = std::min(cfg.grid, 25);
  coarse.slice_samples = std::min(cfg.slice_samples, 24);
  coarse.jobs = 1;
  CheckConfig fine = cfg;
  fine.jobs = 1;

  std::vector<std::optional<Survivor>> found(combos.size());
  parallel_for(static_cast<int>(combos.size()), cfg.jobs, [&](int idx) {
    const Combo& c = combos[idx];
    if (!props[c.policy].consistent) return;
    const Eigen::VectorXd pv = -c.lambda * dpsi.vertex(c.vertex) - c.xi;
    const Eigen::VectorXd pS = pv.tail(P.n);
    const double scale = std::abs(pv[0]) + pS.norm() + c.lambda;
    if (!(scale > cfg.tol_triv)) return;
    // Normalize before screening so tolerances act on comparable sizes.
    const AdjointResult adj = solve_adjoint(props[c.policy], pS / scale, c.lambda / scale);
    if (adj.max_residual > cfg.tol_adj) return;
    Multipliers mult;
    mult.p0 = pv[0] / scale;
    mult.lambda = c.lambda / scale;
    mult.pi = c.pi / scale;
    mult.p = adj.p;
    mult.policy = policies[c.policy];
    if (check_hamiltonian_max(P, traj, mult, coarse).verdict != Verdict::pass) return;
    const auto ham = check_hamiltonian_max(P, traj, mult, fine);
    if (ham.verdict != Verdict::pass) return;
    if (check_nontriviality(mult, S, fine).verdict != Verdict::pass) return;
    Survivor sv;
    sv.cone = c.cone;
    sv.policy = policies[c.policy];
    sv.p0 = mult.p0;
    sv.p_final = pS / scale;
    sv.lambda = mult.lambda;
    sv.pi = mult.pi;
    sv.xi = c.xi / scale;
    sv.p = adj.p;
    sv.hamiltonian_gap = ham.residual;
    found[idx] = std::move(sv);
  });
  // Policies that agree on the multipliers give one survivor.
  for (auto& f : found) {
    if (!f) continue;
    const bool dup = std::any_of(out.survivors.begin(), out.survivors.end(), [&](const Survivor& o) {
      return o.cone == f->cone && std::abs(o.p0 - f->p0) < 1e-9 && (o.p_final - f->p_final).norm() < 1e-9 &&
             std::abs(o.lambda - f->lambda) < 1e-9 && std::abs(o.pi - f->pi) < 1e-9 &&
             (o.p.at(0) - f->p.at(0)).norm() < 1e-9;
    });
    if (!dup) out.survivors.push_back(std::move(*f));
  }

  json& j = out.json;
  j["report_version"] = 1;
  j["explored"] = out.explored;
  j["kink_keys"] = out.kink_keys;
  json list = json::array();
  for (const auto& sv : out.survivors) {
    json pol = json::object();
    for (const auto& [k, v] : sv.policy.entries) pol[k] = v;
    json samples = json::array();
    for (int k = 0; k <= 10; ++k) {
      const double s = S * k / 10.0;
      samples.push_back({{"s", s}, {"p", vec_json(sv.p.at(s))}});
    }
    list.push_back({{"cone", sv.cone},
                    {"policy", pol},
                    {"p0", sv.p0},
                    {"p_final", vec_json(sv.p_final)},
                    {"lambda", sv.lambda},
                    {"pi", sv.pi},
                    {"xi", vec_json(sv.xi)},
                    {"hamiltonian_gap", sv.hamiltonian_gap},
                    {"p_samples", samples}});
  }
  j["survivors"] = list;
  j["provenance"] = provenance(cfg);
  j["provenance"]["mesh"] = search.mesh;
  return out;
}

}  // namespace goh
