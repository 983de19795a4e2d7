#include "goh/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace goh {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd sample_ball(Rng& rng, int d, double r) {
  Eigen::VectorXd v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    norm = v.norm();
  }
  const double radius = r * std::pow(rng.uniform(), 1.0 / d);
  return v * (radius / norm);
}

double halton(int index, int dim) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (dim < 0 || dim >= static_cast<int>(std::size(primes))) {
    throw std::out_of_range("halton dimension too large");
  }
  const int base = primes[dim];
  double f = 1.0;
  double result = 0.0;
  for (int i = index + 1; i > 0; i /= base) {
    f /= base;
    result += f * (i % base);
  }
  return result;
}

}  // namespace goh
