#pragma once

#include "goh/genjac.hpp"
#include "goh/integrate.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace goh {

enum class Verdict { pass, fail, marginal, skipped };
std::string to_string(Verdict v);

/// pass when residual <= tol, marginal up to 10 tol, fail beyond.
Verdict grade(double residual, double tol);

struct CheckConfig {
  double tol_triv = 1e-9;
  double tol_adj = 1e-6;
  double tol_tr = 1e-6;
  double tol_H = 1e-6;
  double tol_goh = 1e-6;
  double tol_meas = 0.01;
  double tol_target = 1e-6;
  int grid = 200;
  int slice_samples = 200;
  JacobianMethod method = JacobianMethod::enumeration;
  JacobianParams jac;
  IntegrateOptions integrate;
  AdjointOptions adjoint;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Multipliers as supplied: p(s) as expressions, or p(S) with a policy.
struct MultiplierSpec {
  double p0 = 0.0;
  double lambda = 0.0;
  double pi = 0.0;
  std::vector<Expr> p;
  std::optional<Eigen::VectorXd> p_final;
  SelectionPolicy policy;
};

struct ConditionResult {
  Verdict verdict = Verdict::pass;
  double residual = 0.0;
  nlohmann::json detail = nlohmann::json::object();
};

/// Cell midpoints of a uniform grid on [0, S].
std::vector<double> midpoint_grid(double S, int cells);

ConditionResult check_nontriviality(const Multipliers& mult, double S, const CheckConfig& cfg = {});

/// (p0, p(S)) in -lambda dPsi - polar(T) for some T in the multicone.
ConditionResult check_transversality(const StrictProblem& P, const Eigen::VectorXd& endpoint, double p0,
                                     const Eigen::VectorXd& p_final, double lambda, const Multicone& target,
                                     const CheckConfig& cfg = {});

/// H(candidate) = 0 and H <= 0 on the slice w0 + |w| = 1 along the grid.
ConditionResult check_hamiltonian_max(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                                      const CheckConfig& cfg = {});

/// 0 in p(s) [g_i, g_j]_set(y(s)) on all but a tol_meas fraction of the grid.
ConditionResult check_goh(const StrictProblem& P, const Trajectory& traj, const Multipliers& mult,
                          const CheckConfig& cfg = {});

struct CheckReport {
  ConditionResult nontriviality;
  ConditionResult adjoint;
  ConditionResult transversality;
  ConditionResult hamiltonian;
  ConditionResult goh;
  Verdict overall = Verdict::pass;
  Multipliers multipliers;  // with the resolved costate
  nlohmann::json json;
};

/// Resolves the costate (analytic, or backward from p(S)) and the adjoint residual.
std::pair<Multipliers, ConditionResult> resolve_multipliers(const StrictProblem& P, const Trajectory& traj,
                                                            const MultiplierSpec& spec, const CheckConfig& cfg);

CheckReport run_full_check(const StrictProblem& P, const ControlSchedule& ctrl, const MultiplierSpec& spec,
                           const CheckConfig& cfg = {});

struct SearchConfig {
  int mesh = 12;            // lambda and polar weights on the simplex with step 1 / mesh
  int policy_kink_cap = 8;  // at most 2^8 sign tables
  int max_combinations = 200000;
};

struct Survivor {
  int cone = 0;
  SelectionPolicy policy;
  double p0 = 0.0;
  Eigen::VectorXd p_final;
  double lambda = 0.0;
  double pi = 0.0;
  Eigen::VectorXd xi;
  Costate p;
  double hamiltonian_gap = 0.0;
};

struct SearchResult {
  std::vector<Survivor> survivors;  // normalized to |p0| + |p(S)| + lambda = 1
  std::vector<std::string> kink_keys;
  long explored = 0;
  nlohmann::json json;
};

SearchResult search_multipliers(const StrictProblem& P, const ControlSchedule& ctrl, const CheckConfig& cfg = {},
                                const SearchConfig& search = {});

}  // namespace goh
