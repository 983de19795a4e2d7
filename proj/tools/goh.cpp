#include "goh/checker.hpp"
#include "goh/fileio.hpp"
#include "goh/variations.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_fail = 2;

std::string num(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.8g", v);
  return buf;
}

std::string tuple(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + ")";
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json hull_json(const goh::ConvexHullSet& h) {
  json a = json::array();
  for (const auto& v : h.vertices()) a.push_back(vec_json(v));
  return a;
}

std::vector<std::string> tokens(const std::string& text) {
  std::string t = text;
  for (char& c : t) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Eigen::VectorXd constants(const std::string& text, int size, const std::string& what) {
  const auto tok = tokens(text);
  if (size >= 0 && static_cast<int>(tok.size()) != size) {
    throw std::invalid_argument(what + " needs " + std::to_string(size) + " numbers, got " +
                                std::to_string(tok.size()));
  }
  Eigen::VectorXd v(tok.size());
  for (std::size_t i = 0; i < tok.size(); ++i) v[i] = goh::parse_constant(tok[i]);
  return v;
}

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw goh::FileError(out + ": cannot write file");
  f << text;
}

std::uint64_t effective_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("GOH_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("GOH_SEED is not an unsigned integer: ") + env);
    }
  }
  return seed;
}

struct Inputs {
  std::string problem;
  std::string process;
  std::string variant;
  bool paper_variant = false;

  std::string variant_name() const { return paper_variant ? "paper" : variant; }
};

struct Loaded {
  goh::Document problem_doc;
  goh::Document process_doc;
  goh::StrictProblem P;
  goh::ControlSchedule ctrl;
};

Loaded load(const Inputs& in) {
  Loaded l;
  l.problem_doc = goh::read_toml(in.problem);
  l.P = goh::load_problem(l.problem_doc, in.variant_name());
  l.process_doc = goh::read_toml(in.process);
  l.ctrl = goh::load_schedule(l.process_doc, l.P);
  if (auto t = goh::load_target(l.process_doc, l.P)) l.P.target = *t;
  return l;
}

void add_inputs(CLI::App* cmd, Inputs& in, bool process = true) {
  cmd->add_option("problem", in.problem, "Problem file")->required();
  if (process) cmd->add_option("process", in.process, "Process file")->required();
  cmd->add_option("--variant", in.variant, "Use the [variant.NAME] fields of the problem file");
  cmd->add_flag("--paper-variant", in.paper_variant, "Same as --variant paper");
}

int cmd_simulate(const Inputs& in, const std::string& csv, int samples) {
  const Loaded l = load(in);
  const auto traj = goh::solve_forward(l.P, l.ctrl, goh::initial_state(l.P));
  const Eigen::VectorXd& e = traj.endpoint();
  if (!csv.empty()) {
    std::ofstream f(csv);
    if (!f) throw goh::FileError(csv + ": cannot write file");
    f << "s,y0";
    for (int i = 1; i <= l.P.n; ++i) f << ",y" << i;
    f << ",yl,beta\n";
    f.precision(17);
    for (int k = 0; k < samples; ++k) {
      const double s = traj.S() * k / std::max(1, samples - 1);
      const Eigen::VectorXd y = traj.at(s);
      f << s;
      for (int i = 0; i < y.size(); ++i) f << "," << y[i];
      f << "\n";
    }
  }
  std::cout << "endpoint " << tuple(e.head(l.P.n + 1)) << " cost " << num(goh::extended_cost(l.P, e)) << " beta "
            << num(e[l.P.n + 2]) << "\n";
  return exit_ok;
}

// Bracket of every variant at the probe point, next to the reference set.
json bracket_records(const Loaded& l, const goh::Trajectory& traj, const goh::Multipliers& mult,
                     const goh::CheckConfig& cfg) {
  const auto probe = goh::load_probe(l.problem_doc, l.P);
  if (!probe) return nullptr;
  json j;
  j["point"] = vec_json(probe->point);
  j["pair"] = {probe->i + 1, probe->j + 1};
  std::optional<goh::ConvexHullSet> ref;
  if (!probe->claimed.empty()) {
    ref = goh::ConvexHullSet::from_vectors(probe->claimed);
    j["reference"] = hull_json(*ref);
  }
  std::vector<std::string> names{""};
  for (const auto& v : goh::variant_names(l.problem_doc)) names.push_back(v);
  json records = json::array();
  for (const auto& name : names) {
    const auto P = goh::load_problem(l.problem_doc, name);
    goh::JacobianParams jp = cfg.jac;
    jp.seed = cfg.seed;
    const auto en = goh::setvalued_bracket(P.g[probe->i], P.g[probe->j], probe->point,
                                           goh::JacobianMethod::enumeration, jp);
    const auto sa = goh::setvalued_bracket(P.g[probe->i], P.g[probe->j], probe->point,
                                           goh::JacobianMethod::sampling, jp);
    json r;
    r["variant"] = name.empty() ? "default" : name;
    r["enumeration"] = hull_json(en);
    r["sampling"] = hull_json(sa);
    r["estimator_hausdorff"] = goh::hausdorff(en, sa);
    if (ref) r["reference_hausdorff"] = goh::hausdorff(en, *ref);
    // Covector intervals of this variant along the checked trajectory.
    goh::CheckConfig c = cfg;
    const auto g = goh::check_goh(P, traj, mult, c);
    json ranges = json::array();
    for (const auto& pr : g.detail.value("pairs", json::array())) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& row : pr["intervals"]) {
        lo = std::min(lo, row["lo"].get<double>());
        hi = std::max(hi, row["hi"].get<double>());
      }
      ranges.push_back({{"i", pr["i"]}, {"j", pr["j"]}, {"verdict", pr["verdict"]}, {"lo_min", lo}, {"hi_max", hi}});
    }
    r["goh"] = {{"verdict", goh::to_string(g.verdict)}, {"pairs", ranges}};
    records.push_back(std::move(r));
  }
  j["variants"] = records;
  return j;
}

struct CheckFlags {
  std::string multipliers;
  std::string out;
  std::string method = "enumeration";
  std::uint64_t seed = 0;
  int grid = 200;
  int jobs = 1;
};

goh::CheckConfig check_config(const CheckFlags& f) {
  goh::CheckConfig cfg;
  cfg.seed = effective_seed(f.seed);
  cfg.grid = f.grid;
  cfg.method = goh::parse_method(f.method);
  cfg.jobs = f.jobs;
  cfg.jac.jobs = 1;
  return cfg;
}

int cmd_check(const Inputs& in, const CheckFlags& f) {
  const Loaded l = load(in);
  const goh::Document mdoc = f.multipliers.empty() ? l.process_doc : goh::read_toml(f.multipliers);
  if (!goh::has_multipliers(mdoc)) throw goh::FileError(mdoc.source + ": no [multipliers] table");
  const auto spec = goh::load_multipliers(mdoc, l.P);
  const auto cfg = check_config(f);
  auto rep = goh::run_full_check(l.P, l.ctrl, spec, cfg);
  json j = rep.json;
  j["inputs"] = {{"problem", in.problem},
                 {"process", in.process},
                 {"multipliers", f.multipliers.empty() ? in.process : f.multipliers},
                 {"variant", in.variant_name().empty() ? "default" : in.variant_name()}};
  const auto traj = goh::solve_forward(l.P, l.ctrl, goh::initial_state(l.P), cfg.integrate);
  const json records = bracket_records(l, traj, rep.multipliers, cfg);
  if (!records.is_null()) j["bracket_records"] = records;
  emit(j, f.out);
  return rep.overall == goh::Verdict::pass ? exit_ok : exit_fail;
}

struct BracketFlags {
  std::string point;
  std::string pair = "1 2";
  std::string method = "enumeration";
  std::string covector;
  double s = 0.0;
  std::uint64_t seed = 0;
};

int cmd_bracket(const Inputs& in, const BracketFlags& f) {
  const auto doc = goh::read_toml(in.problem);
  const auto P = goh::load_problem(doc, in.variant_name());
  const Eigen::VectorXd z = constants(f.point, P.n, "--point");
  const Eigen::VectorXd pr = constants(f.pair, 2, "--pair");
  const int i = static_cast<int>(pr[0]) - 1;
  const int j = static_cast<int>(pr[1]) - 1;
  if (i < 0 || j < 0 || i >= P.m || j >= P.m || pr[0] != i + 1 || pr[1] != j + 1) {
    throw std::invalid_argument("--pair needs two control indices in 1.." + std::to_string(P.m));
  }
  std::vector<goh::JacobianMethod> methods;
  if (f.method == "both") {
    methods = {goh::JacobianMethod::enumeration, goh::JacobianMethod::sampling};
  } else {
    methods = {goh::parse_method(f.method)};
  }
  std::optional<Eigen::VectorXd> p;
  if (!f.covector.empty()) {
    const auto tok = tokens(f.covector);
    if (static_cast<int>(tok.size()) != P.n) {
      throw std::invalid_argument("--covector needs " + std::to_string(P.n) + " components");
    }
    goh::EvalPoint at;
    at.s = f.s;
    p = Eigen::VectorXd(P.n);
    for (int k = 0; k < P.n; ++k) (*p)[k] = goh::Expr::parse(tok[k], P.dims()).eval(at);
  }
  goh::JacobianParams jp;
  jp.seed = effective_seed(f.seed);
  std::vector<goh::ConvexHullSet> hulls;
  for (auto m : methods) {
    hulls.push_back(goh::setvalued_bracket(P.g[i], P.g[j], z, m, jp).reduced());
    const auto& h = hulls.back();
    std::cout << goh::to_string(m) << ": " << h.size() << (h.size() == 1 ? " vertex" : " vertices") << "\n";
    for (const auto& v : h.vertices()) std::cout << "  " << tuple(v) << "\n";
    if (p) {
      const auto iv = goh::covector_interval(*p, h);
      std::cout << "interval [" << num(iv.lo) << ", " << num(iv.hi) << "]\n";
    }
  }
  if (hulls.size() == 2) std::cout << "hausdorff " << num(goh::hausdorff(hulls[0], hulls[1])) << "\n";
  return exit_ok;
}

struct VariationFlags {
  std::vector<std::string> needles;
  std::vector<std::string> brackets;
  std::string eps = "1e-2 1e-3 1e-4";
  std::string method = "enumeration";
  std::string out;
  int jobs = 1;
};

int cmd_variations(const Inputs& in, const VariationFlags& f) {
  const Loaded l = load(in);
  std::vector<goh::Variation> vars;
  for (const auto& text : f.needles) {
    const Eigen::VectorXd v = constants(text, 2 + l.P.m + l.P.q, "--needle");
    goh::Needle nd;
    nd.w0 = v[1];
    nd.w = v.segment(2, l.P.m);
    nd.a = v.tail(l.P.q);
    vars.push_back({v[0], nd});
  }
  for (const auto& text : f.brackets) {
    auto tok = tokens(text);
    goh::Bracket b;
    if (tok.size() == 4 && tok[3] == "reversed") {
      b.reversed = true;
      tok.pop_back();
    }
    if (tok.size() != 3) throw std::invalid_argument("--bracket takes \"S I J\" with an optional \"reversed\"");
    const double s = goh::parse_constant(tok[0]);
    b.i = std::stoi(tok[1]) - 1;
    b.j = std::stoi(tok[2]) - 1;
    if (b.i < 0 || b.j < 0 || b.i >= l.P.m || b.j >= l.P.m || b.i == b.j) {
      throw std::invalid_argument("--bracket needs two distinct control indices in 1.." + std::to_string(l.P.m));
    }
    vars.push_back({s, b});
  }
  if (vars.empty()) throw std::invalid_argument("give at least one --needle or --bracket");
  const Eigen::VectorXd eps = constants(f.eps, -1, "--eps");
  goh::QdqOptions opts;
  opts.method = goh::parse_method(f.method);
  opts.jobs = f.jobs;
  const auto cols = goh::qdq_oracle(l.P, l.ctrl, vars, std::vector<double>(eps.data(), eps.data() + eps.size()), opts);
  json j;
  j["report_version"] = 1;
  json list = json::array();
  bool all = true;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = cols[k];
    json col;
    col["kind"] = std::holds_alternative<goh::Needle>(vars[k].c) ? "needle" : "bracket";
    col["s_requested"] = vars[k].s;
    col["s"] = c.s;
    json rows = json::array();
    for (std::size_t r = 0; r < c.eps.size(); ++r) {
      rows.push_back({{"eps", c.eps[r]}, {"distance", c.distance[r]}, {"quotient", vec_json(c.quotient[r])}});
    }
    col["rows"] = rows;
    col["transported"] = hull_json(c.transported);
    col["rate"] = c.rate ? json(*c.rate) : json(nullptr);
    col["decreasing"] = c.decreasing;
    col["pass"] = c.pass;
    if (!c.warning.empty()) col["warning"] = c.warning;
    all = all && c.pass;
    list.push_back(std::move(col));
  }
  j["columns"] = list;
  j["pass"] = all;
  emit(j, f.out);
  return all ? exit_ok : exit_fail;
}

int cmd_search(const Inputs& in, const CheckFlags& f, int mesh) {
  const Loaded l = load(in);
  const auto cfg = check_config(f);
  goh::SearchConfig sc;
  sc.mesh = mesh;
  auto res = goh::search_multipliers(l.P, l.ctrl, cfg, sc);
  emit(res.json, f.out);
  return exit_ok;
}

int cmd_extend(const Inputs& in, const std::string& strict, const std::string& out) {
  const auto doc = goh::read_toml(in.problem);
  const auto P = goh::load_problem(doc, in.variant_name());
  const auto sdoc = goh::read_toml(strict);
  const auto input = goh::load_strict(sdoc, P);
  const auto ctrl = goh::extend_controls(P, input.process, input.rates);
  const std::string text = goh::write_toml(goh::schedule_json(ctrl));
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw goh::FileError(out + ": cannot write file");
    f << text;
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonsmooth Goh-type certificate checker"};
  app.require_subcommand(1);

  Inputs in;
  std::string csv;
  int samples = 201;
  auto* sim = app.add_subcommand("simulate", "Integrate a process and print its endpoint");
  add_inputs(sim, in);
  sim->add_option("--csv", csv, "Write sampled states to this CSV file");
  sim->add_option("--samples", samples, "CSV rows")->check(CLI::Range(2, 1000000));

  CheckFlags cf;
  auto* check = app.add_subcommand("check", "Verify conditions i) to v) for given multipliers");
  add_inputs(check, in);
  check->add_option("--multipliers", cf.multipliers, "Multiplier file (default: the process file)");
  check->add_option("--seed", cf.seed, "Seed for sampling estimators (GOH_SEED overrides)");
  check->add_option("--grid", cf.grid, "Grid cells on [0, S]")->check(CLI::Range(1, 1000000));
  check->add_option("--method", cf.method, "enumeration | sampling | mollified");
  check->add_option("--out", cf.out, "Write the report here instead of stdout");
  check->add_option("--jobs", cf.jobs, "Worker threads")->check(CLI::Range(1, 1024));

  BracketFlags bf;
  auto* bracket = app.add_subcommand("bracket", "Set-valued bracket of two control fields at a point");
  add_inputs(bracket, in, false);
  bracket->add_option("--point", bf.point, "State, e.g. \"1 0 0\"")->required();
  bracket->add_option("--pair", bf.pair, "Control indices, e.g. \"1 2\"");
  bracket->add_option("--method", bf.method, "enumeration | sampling | mollified | both");
  bracket->add_option("--covector", bf.covector, "Covector components, expressions in s");
  bracket->add_option("--s", bf.s, "Value of s for the covector");
  bracket->add_option("--seed", bf.seed, "Seed for sampling (GOH_SEED overrides)");

  VariationFlags vf;
  auto* var = app.add_subcommand("variations", "Difference-quotient test of needle and bracket variations");
  add_inputs(var, in);
  var->add_option("--needle", vf.needles, "\"S W0 W1..Wm A1..Aq\"");
  var->add_option("--bracket", vf.brackets, "\"S I J [reversed]\"");
  var->add_option("--eps", vf.eps, "Schedule, e.g. \"1e-2 1e-3 1e-4\"");
  var->add_option("--method", vf.method, "Jacobian estimator");
  var->add_option("--out", vf.out, "Write the report here instead of stdout");
  var->add_option("--jobs", vf.jobs, "Worker threads")->check(CLI::Range(1, 1024));

  CheckFlags sf;
  int mesh = 12;
  auto* search = app.add_subcommand("search", "Search multipliers satisfying conditions i) to iv)");
  add_inputs(search, in);
  search->add_option("--mesh", mesh, "Simplex mesh for lambda and polar weights")->check(CLI::Range(1, 1000));
  search->add_option("--seed", sf.seed, "Seed (GOH_SEED overrides)");
  search->add_option("--method", sf.method, "Jacobian estimator");
  search->add_option("--out", sf.out, "Write the result here instead of stdout");
  search->add_option("--jobs", sf.jobs, "Worker threads")->check(CLI::Range(1, 1024));

  std::string strict, extend_out;
  auto* extend = app.add_subcommand("extend", "Extended controls of a strict process");
  add_inputs(extend, in, false);
  extend->add_option("strict", strict, "Strict process file")->required();
  extend->add_option("--out", extend_out, "Write the process file here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_error;
  }

  try {
    if (!in.variant.empty() && in.paper_variant && in.variant != "paper") {
      throw std::invalid_argument("--paper-variant conflicts with --variant " + in.variant);
    }
    if (*sim) return cmd_simulate(in, csv, samples);
    if (*check) return cmd_check(in, cf);
    if (*bracket) return cmd_bracket(in, bf);
    if (*var) return cmd_variations(in, vf);
    if (*search) return cmd_search(in, sf, mesh);
    if (*extend) return cmd_extend(in, strict, extend_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_error;
  }
  return exit_error;
}
