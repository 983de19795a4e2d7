#pragma once

#include "goh/cones.hpp"
#include "goh/expr.hpp"
#include "goh/nsfield.hpp"

#include <Eigen/Core>

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace goh {

enum class NormKind { euclidean, l1 };

/// Data of the strict problem; the extended problem is derived from it.
struct StrictProblem {
  int n = 0;
  int m = 0;
  int m1 = 0;
  int q = 0;
  NonsmoothField f;               // drift, may read a1..aq
  std::vector<NonsmoothField> g;  // control fields g1..gm
  std::optional<Expr> l0;         // l0(x, a)
  std::optional<Expr> l1;         // l1(x, u)
  std::optional<Expr> recession;  // explicit recession of l1 in (x, w0, w)
  NonsmoothField psi;             // final cost over (t, x), one component
  Eigen::VectorXd x0;
  double K = std::numeric_limits<double>::infinity();
  PolyhedralCone C;               // control cone in R^m
  Eigen::VectorXd a_lower;        // box A
  Eigen::VectorXd a_upper;
  Multicone target;               // approximating multicone at the candidate endpoint
  std::vector<Expr> target_constraints;  // c(t, x) <= 0
  NormKind norm = NormKind::euclidean;
  double rho = 0.2;

  Dims dims() const { return {n, m, q}; }
  /// Throws std::invalid_argument on inconsistent data.
  void validate() const;
};

double control_norm(const StrictProblem& P, const Eigen::VectorXd& w);

/// One constant piece of an extended control (w0, w, alpha, zeta).
struct ControlPiece {
  double duration = 0.0;
  double w0 = 0.0;
  Eigen::VectorXd w;
  Eigen::VectorXd alpha;
  double zeta = 0.0;
};

using ControlSchedule = std::vector<ControlPiece>;

double schedule_length(const ControlSchedule& ctrl);
/// Piece containing s (pieces are closed on the right; s = 0 maps to the first).
int piece_index(const ControlSchedule& ctrl, double s);
std::vector<double> breakpoints(const ControlSchedule& ctrl);  // 0, ..., S
bool is_canonical(const StrictProblem& P, const ControlSchedule& ctrl, double tol = 1e-9);
void validate_schedule(const StrictProblem& P, const ControlSchedule& ctrl);

struct StrictPiece {
  double duration = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd a;
};

struct StrictProcess {
  std::vector<StrictPiece> pieces;
  double T() const;
};

/// Extended controls of a strict process. An empty `rates` means the uniform
/// rate w0 = 1 / (1 + |u|), which yields a canonical schedule.
ControlSchedule extend_controls(const StrictProblem& P, const StrictProcess& sp,
                                const std::vector<double>& rates = {});

/// Inverse of extend_controls for schedules with w0 > 0 on every piece.
StrictProcess restrict_to_strict(const ControlSchedule& ctrl);

/// Rescales every piece so that w0 + |w| = 1.
ControlSchedule canonicalize(const StrictProblem& P, const ControlSchedule& ctrl);

/// Equivalent schedule under the increasing piecewise-linear map sigma from
/// [0, S_hat] onto [0, S] with the given knots.
ControlSchedule reparametrize(const ControlSchedule& ctrl, const std::vector<double>& knots_hat,
                              const std::vector<double>& knots_s);

/// Recession of l1 at (x, w0, w); numeric limit when w0 = 0 and no explicit form.
double recession_l1(const StrictProblem& P, const Eigen::VectorXd& x, double w0, const Eigen::VectorXd& w);

/// lim_{r -> 0} of a geometric sequence r_k = 10^(-2-k); throws on divergence.
double extrapolate_limit(const std::vector<double>& values);

double lagrangian_e(const StrictProblem& P, const Eigen::VectorXd& y, double w0, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& a);

/// Extended state layout: (y0, y1..yn, yl, beta).
inline int state_size(const StrictProblem& P) { return P.n + 3; }

/// (dy0, dy, dyl, dbeta)/ds at zeta = 0.
Eigen::VectorXd extended_dynamics(const StrictProblem& P, const Eigen::VectorXd& y, double w0,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& a);

/// F^e = f w0 + sum g_i w^i.
Eigen::VectorXd drift_e(const StrictProblem& P, const Eigen::VectorXd& y, double w0, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& a);

double hamiltonian(const StrictProblem& P, const Eigen::VectorXd& y, double p0, const Eigen::VectorXd& p,
                   double lambda, double pi, double w0, const Eigen::VectorXd& w, const Eigen::VectorXd& a);

/// Final cost plus accumulated Lagrangian at an extended endpoint.
double extended_cost(const StrictProblem& P, const Eigen::VectorXd& endpoint);

/// Max of the target constraints at (t, x); <= 0 means on target.
double target_violation(const StrictProblem& P, const Eigen::VectorXd& endpoint);

/// Kink sign choice per "<field>:<ordinal>" key (fields f, g1.., l0, l1);
/// values -1, +1, or 0 for the midpoint of the feasible limits.
struct SelectionPolicy {
  std::map<std::string, int> entries;

  int lookup(const std::string& key) const;
};

/// One element (M, omega) of the generalized Jacobian of (F^e, l^e) in y.
struct ExtendedJacobian {
  Eigen::MatrixXd M;
  Eigen::VectorXd omega;
  std::vector<std::pair<std::string, int>> signs;  // kink key and sign used
};

struct JacobianQuery {
  double kink_tol = default_kink_tol;
  double radius = 1e-6;
  int cap = 16;
  std::uint64_t seed = 0;
};

/// All joint limit Jacobians of (F^e, l^e) in y at the given control.
std::vector<ExtendedJacobian> extended_jacobians(const StrictProblem& P, const Eigen::VectorXd& y, double w0,
                                                 const Eigen::VectorXd& w, const Eigen::VectorXd& a,
                                                 const JacobianQuery& query = {});

/// The policy's element: explicit signs where given, the average of the
/// consistent limits elsewhere.
ExtendedJacobian select_jacobian(const std::vector<ExtendedJacobian>& all, const SelectionPolicy& policy,
                                 bool* consistent = nullptr);

/// Kink keys active somewhere in `all`.
std::vector<std::string> kink_keys(const std::vector<ExtendedJacobian>& all);

}  // namespace goh
