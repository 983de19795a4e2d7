#pragma once

#include "goh/hull.hpp"
#include "goh/nsfield.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace goh {

enum class JacobianMethod { enumeration, sampling, mollified };

std::string to_string(JacobianMethod m);
JacobianMethod parse_method(const std::string& name);

struct JacobianParams {
  double kink_tol = default_kink_tol;
  int cap = 16;
  double pattern_radius = 1e-6;  // ball used to decide pattern feasibility
  double r0 = 1e-3;
  int radii = 7;  // r_k = r0 * 2^-k
  int samples = 512;
  int min_accepted = 32;
  int mollifier_samples = 1024;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Generalized Jacobian of f at z (rows: components, cols: coordinates).
ConvexHullSet clarke_jacobian(const NonsmoothField& f, const Eigen::VectorXd& z,
                              JacobianMethod method, const JacobianParams& params = {},
                              const EvalPoint& ctx = {});

/// Sampling hulls at every radius of the schedule (empty entries where no
/// sample was accepted), largest radius first.
std::vector<std::vector<Eigen::MatrixXd>> sampled_jacobians(const NonsmoothField& f,
                                                            const Eigen::VectorXd& z,
                                                            const JacobianParams& params,
                                                            const EvalPoint& ctx = {});

/// Set-valued bracket [g, h] = hull of limits of Dh g - Dg h.
ConvexHullSet setvalued_bracket(const NonsmoothField& g, const NonsmoothField& h,
                                const Eigen::VectorXd& z, JacobianMethod method,
                                const JacobianParams& params = {}, const EvalPoint& ctx = {});

/// Classical bracket Dh g - Dg h with natural abs signs.
Eigen::VectorXd classical_bracket(const NonsmoothField& g, const NonsmoothField& h,
                                  const Eigen::VectorXd& z, const EvalPoint& ctx = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Interval covector_interval(const Eigen::VectorXd& p, const ConvexHullSet& set);

enum class Membership { holds, marginal, fails };

std::string to_string(Membership m);

Membership goh_zero_membership(const Interval& interval, double tol);

}  // namespace goh
