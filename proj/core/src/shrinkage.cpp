#include "mgst/shrinkage.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mgst/errors.hpp"

namespace mgst {

void GstConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError(fmt::format("GST exponent p={} outside (0,1]", p));
  if (!(theta >= 0.0)) throw ValidationError(fmt::format("GST threshold theta={} is negative", theta));
  if (n_iters < 1) throw ValidationError(fmt::format("GST needs n_iters >= 1, got {}", n_iters));
  if (!(delta > 0.0)) throw ValidationError(fmt::format("GST delta={} must be positive", delta));
}

double soft(double y, double theta) {
  if (!(theta >= 0.0)) throw ValidationError(fmt::format("soft threshold {} is negative", theta));
  const double a = std::abs(y);
  return a <= theta ? 0.0 : std::copysign(a - theta, y);
}

double tau_p(double theta, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError(fmt::format("tau_p exponent p={} outside (0,1]", p));
  if (!(theta >= 0.0)) throw ValidationError(fmt::format("tau_p threshold theta={} is negative", theta));
  if (theta == 0.0) return 0.0;
  const double base = 2.0 * theta * (1.0 - p);
  // std::pow(0, 0) == 1 gives tau_1(theta) = theta.
  return std::pow(base, 1.0 / (2.0 - p)) + theta * p * std::pow(base, (p - 1.0) / (2.0 - p));
}

double gst_unchecked(double y, const GstConfig& cfg, double tau) {
  const double a = std::abs(y);
  if (a <= tau) return 0.0;
  double s = a;
  for (int m = 0; m < cfg.n_iters; ++m) {
    s = a - cfg.theta * cfg.p * std::pow(s + cfg.delta, cfg.p - 1.0);
  }
  return std::copysign(s, y);
}

double gst(double y, const GstConfig& cfg) {
  cfg.validate();
  return gst_unchecked(y, cfg, tau_p(cfg.theta, cfg.p));
}

double prox_oracle(double y, double theta, double p, double grid_step) {
  if (!(grid_step > 0.0)) throw ValidationError("prox_oracle grid_step must be positive");
  const double reach = std::abs(y) + 1.0;
  const long steps = static_cast<long>(std::ceil(reach / grid_step));
  auto cost = [&](double x) {
    const double d = x - y;
    return 0.5 * d * d + (x == 0.0 ? 0.0 : theta * std::pow(std::abs(x), p));
  };
  // Walk outward from 0 so the first minimum found has the smallest |x|.
  double best_x = 0.0;
  double best = cost(0.0);
  for (long k = 1; k <= steps; ++k) {
    for (const double x : {k * grid_step, -k * grid_step}) {
      const double c = cost(x);
      if (c < best) {
        best = c;
        best_x = x;
      }
    }
  }
  return best_x;
}

}  // namespace mgst
