#pragma once

#include "goh/genjac.hpp"
#include "goh/integrate.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace goh {

struct Needle {
  double w0 = 0.0;
  Eigen::VectorXd w;
  Eigen::VectorXd a;
  double zeta = 0.0;
};

/// Impulse legs +e_i, +e_j, -e_i, -e_j (0-based indices); `reversed` runs
/// -e_j, -e_i, +e_j, +e_i instead.
struct Bracket {
  int i = 0;
  int j = 1;
  bool reversed = false;
};

using Generator = std::variant<Needle, Bracket>;

struct Variation {
  double s = 0.0;
  Generator c;
};

/// Length of the window [s - width, s] modified by the variation.
double window_width(const Generator& c, double eps);

/// Replaces the control on [s - eps, s] by the needle value. A needle placed
/// on a breakpoint moves left by one integration cell; `warning` reports it.
ControlSchedule apply_needle(const ControlSchedule& ctrl, double s, const Needle& c, double eps,
                             std::string* warning = nullptr);

/// Doubled-rate copy of [s - 8 sqrt(eps), s] on the first half of the window,
/// followed by four pure impulse legs of length sqrt(eps).
ControlSchedule apply_bracket(const ControlSchedule& ctrl, double s, const Bracket& c, double eps);

ControlSchedule apply_variation(const ControlSchedule& ctrl, const Variation& v, double eps,
                                std::string* warning = nullptr);

struct VariationVector {
  ConvexHullSet V;              // in R^(1+n+1): (v0, v, vl)
  std::optional<double> v_nu;   // needle only
};

VariationVector variation_vector(const StrictProblem& P, const Trajectory& traj, double s, const Generator& c,
                                 JacobianMethod method = JacobianMethod::enumeration,
                                 const JacobianParams& params = {});

/// Applies every variation (windows must be disjoint) and integrates.
Eigen::VectorXd endpoint_map(const StrictProblem& P, const ControlSchedule& ctrl, const std::vector<Variation>& vars,
                             const std::vector<double>& eps, const IntegrateOptions& opts = {});

struct QdqColumn {
  std::vector<double> eps;
  std::vector<double> distance;       // hull distance of the quotient
  double s = 0.0;                     // site actually used
  std::vector<Eigen::VectorXd> quotient;
  ConvexHullSet transported;          // candidate set E'_k V
  std::optional<double> rate;         // log-log slope of distance vs eps, when measurable
  bool decreasing = false;
  bool pass = false;
  std::string warning;
};

struct QdqOptions {
  double tol = 1e-4;
  double floor = 1e-11;  // endpoint gaps below floor (1 + |Y(0)|) are roundoff
  IntegrateOptions integrate;
  AdjointOptions transport;
  JacobianMethod method = JacobianMethod::enumeration;
  JacobianParams params;
  int jobs = 1;
};

/// Difference quotients (Y(eps e_k) - Y(0)) / eps of Y = (y0, y, yl)(S)
/// against the transported variation vectors, one column per variation.
std::vector<QdqColumn> qdq_oracle(const StrictProblem& P, const ControlSchedule& ctrl,
                                  const std::vector<Variation>& vars, const std::vector<double>& eps_schedule,
                                  const QdqOptions& opts = {});

}  // namespace goh
