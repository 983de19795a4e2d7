// Acceptance suite. `acceptance N` runs criterion N; without arguments all
// criteria run. Each prints one "criterion N: PASS|FAIL ..." line.

#include "example_problem.hpp"
#include "goh/checker.hpp"
#include "goh/fileio.hpp"
#include "goh/random.hpp"
#include "goh/variations.hpp"
#include "toy_problem.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

const std::filesystem::path data_dir = GOH_DATA_DIR;
const std::string cli = GOH_CLI;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + cli + "' " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof(buf), p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string file(const char* name) { return "'" + (data_dir / name).string() + "'"; }

goh::StrictProblem problem(const char* name, const std::string& variant = "") {
  return goh::load_problem(goh::read_toml(data_dir / name), variant);
}

goh::ControlSchedule schedule(const goh::StrictProblem& P, const char* name) {
  return goh::load_schedule(goh::read_toml(data_dir / name), P);
}

std::string verdict(const json& report, const char* cond) { return report["conditions"][cond]["verdict"]; }

// 1. Candidate endpoint and cost.
Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto P = problem("problem-as-printed.toml");
  const auto traj = goh::solve_forward(P, schedule(P, "candidate.toml"), goh::initial_state(P));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const VectorXd e = traj.endpoint();
  const double err = (e.head(4) - Eigen::Vector4d(1, 0, 0, 1)).lpNorm<Eigen::Infinity>();
  const double cost = goh::extended_cost(P, e);
  o.require(err <= 1e-6, "endpoint error " + fmt(err));
  o.require(std::abs(cost - 1) <= 1e-6, "cost " + fmt(cost));
  o.require(secs < 1.0, "runtime " + fmt(secs) + " s");
  const Run r = run_cli("simulate " + file("problem-as-printed.toml") + " " + file("candidate.toml"));
  o.require(r.code == 0 && r.out.starts_with("endpoint (1, 0, 0, 1) cost 1 "), "cli printed: " + r.out);
  o.note("endpoint error " + fmt(err) + ", cost " + fmt(cost) + ", " + fmt(secs) + " s");
  return o;
}

// 2. Impulsive endpoint, cost and beta.
Outcome criterion2() {
  Outcome o;
  const auto P = problem("problem-as-printed.toml");
  const auto traj = goh::solve_forward(P, schedule(P, "impulsive.toml"), goh::initial_state(P));
  const VectorXd e = traj.endpoint();
  const double err = (e.head(4) - Eigen::Vector4d(1, 0, 0, 0)).lpNorm<Eigen::Infinity>();
  const double cost = goh::extended_cost(P, e);
  const double beta = e[P.n + 2];
  o.require(err <= 1e-6, "endpoint error " + fmt(err));
  o.require(std::abs(cost) <= 1e-6, "cost " + fmt(cost));
  o.require(std::abs(beta - (1 + 2 * std::sqrt(2.0))) <= 1e-6, "beta " + fmt(beta));
  const Run r = run_cli("simulate " + file("problem-as-printed.toml") + " " + file("impulsive.toml"));
  o.require(r.code == 0 && r.out.starts_with("endpoint (1, 0, 0, 0) cost 0 beta 3.8284271"), "cli printed: " + r.out);
  o.note("endpoint error " + fmt(err) + ", beta " + std::to_string(beta));
  return o;
}

// 3. Candidate under the variant fields: i-iv pass, v fails with [-4, -2].
Outcome criterion3() {
  Outcome o;
  const Run r = run_cli("check " + file("problem-paper-variant.toml") + " " + file("candidate.toml") +
                        " --paper-variant");
  if (r.out.empty()) {
    o.require(false, "no report, exit " + std::to_string(r.code));
    return o;
  }
  const json rep = json::parse(r.out);
  const json& c = rep["conditions"];
  for (const char* k : {"i_nontriviality", "ii_adjoint", "iii_transversality", "iv_hamiltonian"}) {
    o.require(verdict(rep, k) == "PASS",
              std::string(k) + " " + verdict(rep, k) + " residual " + fmt(c[k]["residual"].get<double>()));
  }
  o.require(c["ii_adjoint"]["residual"].get<double>() <= 1e-6, "adjoint residual above 1e-6");
  o.require(c["iv_hamiltonian"]["residual"].get<double>() <= 1e-6, "Hamiltonian gap above 1e-6");
  o.require(verdict(rep, "v_goh") == "FAIL", "v_goh " + verdict(rep, "v_goh"));
  double worst = 0;
  int rows = 0;
  for (const auto& row : c["v_goh"]["pairs"][0]["intervals"]) {
    worst = std::max({worst, std::abs(row["lo"].get<double>() + 4), std::abs(row["hi"].get<double>() + 2)});
    ++rows;
  }
  o.require(rows > 0 && worst <= 0.05, "interval distance to [-4, -2] " + fmt(worst));
  o.require(r.code == 2, "exit " + std::to_string(r.code));
  o.note("v_goh " + verdict(rep, "v_goh") + " on " + std::to_string(rows) + " points, max distance to [-4, -2] " +
         fmt(worst));
  return o;
}

// 4. Impulsive minimizer with p = 0, lambda = 1: all conditions pass.
Outcome criterion4() {
  Outcome o;
  for (const char* pf : {"problem-as-printed.toml", "problem-paper-variant.toml"}) {
    const Run r = run_cli("check " + file(pf) + " " + file("impulsive.toml"));
    if (r.out.empty()) {
      o.require(false, std::string(pf) + ": no report, exit " + std::to_string(r.code));
      continue;
    }
    const json rep = json::parse(r.out);
    for (const auto& [k, v] : rep["conditions"].items()) {
      o.require(v["verdict"] == "PASS", std::string(pf) + ": " + k + " " + v["verdict"].get<std::string>());
    }
    o.require(r.code == 0, std::string(pf) + ": exit " + std::to_string(r.code));
  }
  return o;
}

// 5. Estimator agreement on y1 > 0, y2 = 0 and the recorded bracket values.
Outcome criterion5() {
  Outcome o;
  goh::Rng rng(5);
  std::vector<VectorXd> pts;
  for (int k = 0; k < 20; ++k) pts.push_back(Eigen::Vector3d(rng.uniform(0.05, 3), 0, rng.uniform(-2, 2)));
  double worst = 0;
  for (const char* variant : {"", "paper"}) {
    const auto P = problem("problem-as-printed.toml", variant);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      goh::JacobianParams jp;
      jp.seed = k;
      const auto en = goh::setvalued_bracket(P.g[0], P.g[1], pts[k], goh::JacobianMethod::enumeration, jp);
      const auto sa = goh::setvalued_bracket(P.g[0], P.g[1], pts[k], goh::JacobianMethod::sampling, jp);
      worst = std::max(worst, goh::hausdorff(en, sa));
    }
  }
  o.require(worst <= 0.05, "estimator Hausdorff " + fmt(worst));
  const Run r = run_cli("check " + file("problem-as-printed.toml") + " " + file("candidate.toml"));
  if (r.out.empty()) {
    o.require(false, "no report, exit " + std::to_string(r.code));
    return o;
  }
  const json rep = json::parse(r.out);
  o.require(rep.contains("bracket_records") && rep["bracket_records"].contains("reference"),
            "report lacks the reference bracket");
  std::string printed;
  bool have_default = false, have_paper = false;
  if (rep.contains("bracket_records")) {
    for (const auto& v : rep["bracket_records"]["variants"]) {
      if (v["variant"] == "default") {
        have_default = true;
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& x : v["enumeration"]) {
          lo = std::min(lo, x[2].get<double>());
          hi = std::max(hi, x[2].get<double>());
        }
        printed = "{0}x{0}x[" + fmt(lo) + ", " + fmt(hi) + "]";
      }
      if (v["variant"] == "paper") have_paper = true;
    }
  }
  o.require(have_default && have_paper, "report lacks a variant record");
  o.note("max estimator Hausdorff " + fmt(worst) + " over 40 hulls; as-printed bracket " + printed +
         " recorded next to reference {0}x{0}x[2, 4]");
  return o;
}

// Central differences, step 1e-7; exact enough for C1 fields with Lipschitz derivatives.
MatrixXd fd_jacobian(const goh::NonsmoothField& f, const VectorXd& x) {
  const double h = 1e-7;
  const VectorXd f0 = f.eval(x);
  MatrixXd J(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    VectorXd a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (f.eval(a) - f.eval(b)) / (2 * h);
  }
  return J;
}

VectorXd fd_bracket(const goh::NonsmoothField& g, const goh::NonsmoothField& h, const VectorXd& x) {
  return fd_jacobian(h, x) * g.eval(x) - fd_jacobian(g, x) * h.eval(x);
}

struct SmoothCase {
  int n;
  std::vector<std::string> f, g, h, covector;
};

goh::StrictProblem smooth_problem(const SmoothCase& c) {
  const goh::Dims d{c.n, 2, 0};
  goh::StrictProblem P;
  P.n = c.n;
  P.m = 2;
  P.m1 = 2;
  P.f = goh::NonsmoothField::parse(c.f, d);
  P.g = {goh::NonsmoothField::parse(c.g, d), goh::NonsmoothField::parse(c.h, d)};
  std::vector<goh::VarRef> tx{{goh::VarKind::t, 0}};
  for (int i = 0; i < c.n; ++i) tx.push_back({goh::VarKind::x, i});
  P.psi = goh::NonsmoothField({goh::Expr::parse("x1^2", d)}, tx);
  P.x0 = VectorXd::LinSpaced(c.n, 0.3, -0.4);
  P.C = goh::PolyhedralCone::whole_space(2);
  return P;
}

// 6. C1 problems: singleton brackets and Jacobians, classical Goh verdicts.
Outcome criterion6() {
  Outcome o;
  const std::vector<SmoothCase> cases = {
      {2, {"0", "0"}, {"1", "0"}, {"0", "x1"}, {"1 - s", "0.5"}},
      {3, {"0", "0", "0"}, {"-x2", "x1", "0"}, {"x2 * x3", "x1^2", "1 + x2"}, {"s", "1", "-0.5"}},
      {2, {"x2", "0"}, {"x1 * abs(x1)", "1"}, {"1", "x2^2"}, {"1", "s - 0.5"}},
      {3, {"0", "0", "0"}, {"1", "0", "x2"}, {"0", "1", "-x1"}, {"1", "s", "0"}},
      {2, {"x2", "-x1"}, {"1", "0"}, {"0", "1"}, {"2", "-1"}},
  };
  goh::Rng rng(6);
  double jac_err = 0, br_err = 0, iv_err = 0;
  int non_singleton = 0, verdict_mismatch = 0, goh_fail = 0, goh_pass = 0;
  for (const auto& c : cases) {
    const auto P = smooth_problem(c);
    const goh::Dims d = P.dims();
    for (int k = 0; k < 20; ++k) {
      VectorXd x(c.n);
      for (int i = 0; i < c.n; ++i) x[i] = rng.uniform(-1.5, 1.5);
      if (k % 5 == 0) x[0] = 0.0;  // x1 |x1| has its kink here
      for (const auto* f : {&P.g[0], &P.g[1]}) {
        const auto J = goh::clarke_jacobian(*f, x, goh::JacobianMethod::enumeration);
        if (J.size() != 1) ++non_singleton;
        jac_err = std::max(jac_err, (J.matrix(0) - fd_jacobian(*f, x)).lpNorm<Eigen::Infinity>());
      }
      const auto B = goh::setvalued_bracket(P.g[0], P.g[1], x, goh::JacobianMethod::enumeration);
      if (B.size() != 1) ++non_singleton;
      br_err = std::max(br_err, (B.vertex(0) - fd_bracket(P.g[0], P.g[1], x)).lpNorm<Eigen::Infinity>());
    }
    goh::ControlPiece piece;
    piece.duration = 1;
    piece.w0 = 0.5;
    piece.w = Eigen::Vector2d(0.3, -0.2);
    const auto traj = goh::solve_forward(P, {piece}, goh::initial_state(P));
    for (bool zero : {false, true}) {
      std::vector<goh::Expr> p;
      for (const auto& e : c.covector) p.push_back(goh::Expr::parse(zero ? "0" : e, d));
      goh::Multipliers m;
      m.p = goh::Costate::analytic(p);
      goh::CheckConfig cfg;
      cfg.grid = 50;
      const auto r = goh::check_goh(P, traj, m, cfg);
      // Classical test: p . [g, h] = 0 up to tol on all but tol_meas of the grid.
      int good = 0;
      const auto grid = goh::midpoint_grid(traj.S(), cfg.grid);
      const auto& rows = r.detail["pairs"][0]["intervals"];
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double v = m.p.at(grid[k]).dot(fd_bracket(P.g[0], P.g[1], traj.state(P, grid[k])));
        if (std::abs(v) <= cfg.tol_goh) ++good;
        iv_err = std::max({iv_err, std::abs(rows[k]["lo"].get<double>() - v), std::abs(rows[k]["hi"].get<double>() - v)});
      }
      const bool classical = good >= (1.0 - cfg.tol_meas) * grid.size();
      if (classical != (r.verdict == goh::Verdict::pass)) ++verdict_mismatch;
      (classical ? goh_pass : goh_fail)++;
    }
  }
  o.require(non_singleton == 0, std::to_string(non_singleton) + " non-singleton hulls");
  o.require(jac_err <= 1e-6, "Jacobian error " + fmt(jac_err));
  o.require(br_err <= 1e-6, "bracket error " + fmt(br_err));
  o.require(iv_err <= 1e-6, "Goh interval error " + fmt(iv_err));
  o.require(verdict_mismatch == 0, std::to_string(verdict_mismatch) + " Goh verdicts differ from the classical test");
  o.note("Jacobian error " + fmt(jac_err) + ", bracket error " + fmt(br_err) + ", classical Goh " +
         std::to_string(goh_pass) + " pass / " + std::to_string(goh_fail) + " fail, all matched");
  return o;
}

// 7. Difference quotients on the smooth toy.
Outcome criterion7() {
  Outcome o;
  const auto P = bracket_toy();
  const auto ctrl = rest_schedule(2);
  goh::Needle nd;
  nd.w0 = 0;
  nd.w = Eigen::Vector2d(1, 1);
  nd.a.resize(0);
  const std::vector<goh::Variation> vars{{1.0, goh::Bracket{0, 1, false}}, {1.0, nd}};
  const auto cols = goh::qdq_oracle(P, ctrl, vars, {1e-2, 1e-3, 1e-4});
  const auto& br = cols[0];
  // Transported bracket direction in (y0, y1, y2, yl): rest reference, identity transport.
  const double hd = goh::hull_distance(br.transported, Eigen::Vector4d(0, 0, 1, 0));
  o.require(hd <= 1e-9, "transported set misses (0, 1): " + fmt(hd));
  o.require(br.distance.back() < 1e-3, "bracket distance at 1e-4 " + fmt(br.distance.back()));
  o.require(br.decreasing, "bracket column not decreasing");
  const auto& nc = cols[1];
  o.require(nc.rate && *nc.rate >= 0.9, "needle rate " + (nc.rate ? fmt(*nc.rate) : std::string("unmeasured")));
  o.note("bracket distances " + fmt(br.distance[0]) + " " + fmt(br.distance[1]) + " " + fmt(br.distance[2]) +
         ", needle rate " + (nc.rate ? fmt(*nc.rate) : std::string("-")));
  return o;
}

goh::PolyhedralCone random_cone(goh::Rng& rng, int d) {
  const int k = 1 + static_cast<int>(rng.uniform() * (d + 2));
  std::vector<VectorXd> gens;
  std::vector<bool> lines;
  for (int i = 0; i < k; ++i) {
    VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = std::round(rng.uniform(-2.5, 2.5));
    if (v.isZero()) v[0] = 1;
    gens.push_back(v);
    lines.push_back(rng.uniform() < 0.2);
  }
  return {d, gens, lines};
}

// 8. Cone suite.
Outcome criterion8() {
  Outcome o;
  goh::Rng rng(8);
  int separated = 0, mismatch = 0, bad_form = 0, bad_bipolar = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 4;
    const auto c1 = random_cone(rng, d);
    const auto c2 = random_cone(rng, d);
    const auto mu = goh::linearly_separated(c1, c2);
    if (mu.has_value() == goh::is_transversal(c1, c2)) ++mismatch;
    if (mu) {
      ++separated;
      bool ok = std::abs(mu->lpNorm<1>() - 1) <= 1e-9;
      const MatrixXd s1 = c1.spanning_matrix();
      const MatrixXd s2 = c2.spanning_matrix();
      for (int i = 0; i < s1.cols(); ++i) ok = ok && mu->dot(s1.col(i)) >= -1e-9;
      for (int i = 0; i < s2.cols(); ++i) ok = ok && mu->dot(s2.col(i)) <= 1e-9;
      if (!ok) ++bad_form;
    }
    if (!goh::equivalent(goh::polar(goh::polar(c1)), c1)) ++bad_bipolar;
  }
  o.require(mismatch == 0, std::to_string(mismatch) + " separation/transversality mismatches");
  o.require(bad_form == 0, std::to_string(bad_form) + " forms violate their inequalities");
  o.require(bad_bipolar == 0, std::to_string(bad_bipolar) + " bipolar failures");
  o.note(std::to_string(separated) + " of 200 pairs separated");
  return o;
}

// 9. Rate independence under bi-Lipschitz reparametrization.
Outcome criterion9() {
  Outcome o;
  const auto P = problem("problem-as-printed.toml");
  const auto ctrl = schedule(P, "candidate.toml");
  const auto ref = goh::solve_forward(P, ctrl, goh::initial_state(P)).endpoint();
  const double S = goh::schedule_length(ctrl);
  goh::Rng rng(9);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int knots = 2 + trial % 5;
    std::vector<double> hat{0}, s{0};
    for (int k = 1; k <= knots; ++k) {
      hat.push_back(hat.back() + rng.uniform(0.2, 2));
      s.push_back(s.back() + rng.uniform(0.2, 2));
    }
    for (auto& v : s) v *= S / s.back();
    const auto r = goh::reparametrize(ctrl, hat, s);
    const auto e = goh::solve_forward(P, r, goh::initial_state(P)).endpoint();
    worst = std::max({worst, (e.head(P.n + 1) - ref.head(P.n + 1)).lpNorm<Eigen::Infinity>(),
                      std::abs(goh::extended_cost(P, e) - goh::extended_cost(P, ref))});
  }
  o.require(worst <= 1e-7, "max deviation " + fmt(worst));
  o.note("max endpoint/cost deviation " + fmt(worst) + " over 20 reparametrizations");
  return o;
}

// 10. Byte-identical reports.
Outcome criterion10() {
  Outcome o;
  const std::string args = "check " + file("problem-as-printed.toml") + " " + file("candidate.toml") +
                           " --paper-variant --method sampling --grid 50";
  const Run a = run_cli(args, "GOH_SEED=12345");
  const Run b = run_cli(args + " --jobs 4 --seed 99", "GOH_SEED=12345");
  o.require(!a.out.empty() && (a.code == 0 || a.code == 2), "check exit " + std::to_string(a.code));
  o.require(a.out == b.out, "reports differ");
  o.require(a.code == b.code, "exit codes differ");
  o.note(std::to_string(a.out.size()) + " bytes identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                         criterion5, criterion6, criterion7, criterion8,
                                                         criterion9, criterion10};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) which.push_back(i);
  }
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cout << "criterion " << n << ": FAIL no such criterion\n";
      all = false;
      continue;
    }
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
