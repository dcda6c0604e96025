#pragma once

// Spectral radius and the sufficient condition rho_max^2 (1 - q_max) < 1 for
// bounded optimal average cost.

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <span>

#include "sensched/channel.hpp"
#include "sensched/estimation.hpp"

namespace sensched {

/// Closed form for 1x1 and 2x2; repeated squaring with renormalisation
/// (rho = lim ||A^(2^k)||^(1/2^k)) for larger matrices.
inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InvalidArgument("spectral_radius: need a square matrix");
  if (a.rows() == 1) return std::abs(a(0, 0));
  if (a.rows() == 2) {
    const double half_tr = 0.5 * (a(0, 0) + a(1, 1));
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double disc = half_tr * half_tr - det;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      return std::max(std::abs(half_tr + root), std::abs(half_tr - root));
    }
    return std::sqrt(det);  // complex pair, |lambda|^2 = det
  }
  Matrix b = a;
  double log_scale = 0.0;  // A^(2^k) = exp(log_scale) * b
  const double s0 = b.norm();
  if (s0 == 0.0) return 0.0;
  b /= s0;
  log_scale = std::log(s0);
  double estimate = s0;
  for (int k = 1; k <= 60; ++k) {
    b = b * b;
    const double s = b.norm();
    if (s == 0.0) return 0.0;  // nilpotent
    b /= s;
    log_scale = 2.0 * log_scale + std::log(s);
    const double next = std::exp(std::ldexp(log_scale, -k));
    if (std::abs(next - estimate) <= 1e-15 * std::max(1.0, next)) return next;
    estimate = next;
  }
  return estimate;
}

struct StabilityReport {
  double rho_max = 0.0;
  double q_max = 0.0;
  double margin = 0.0;  // 1 - rho_max^2 (1 - q_max)
  bool satisfied = false;
};

inline StabilityReport stability_from(double rho_max, double q_max) {
  StabilityReport r;
  r.rho_max = rho_max;
  r.q_max = q_max;
  r.margin = 1.0 - rho_max * rho_max * (1.0 - q_max);
  r.satisfied = r.margin > 0.0;
  return r;
}

inline StabilityReport stability_check(std::span<const ProcessModel> processes,
                                       std::span<const ChannelModel> channels) {
  double rho = 0.0;
  for (const auto& p : processes) rho = std::max(rho, spectral_radius(p.A()));
  double q = 0.0;
  for (const auto& c : channels) q = std::max(q, c.q);
  return stability_from(rho, q);
}

inline std::ostream& operator<<(std::ostream& os, const StabilityReport& r) {
  return os << "rho_max: " << r.rho_max << "\nq_max: " << r.q_max << "\nmargin: " << r.margin
            << "\nsatisfied: " << (r.satisfied ? "true" : "false") << "\n";
}

}  // namespace sensched
