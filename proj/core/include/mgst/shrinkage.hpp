#pragma once

// Scalar shrinkage rules used by the proximal mapping stages.

namespace mgst {

/// Parameters of the generalized shrinkage threshold (the l_p prox with
/// 0 < p <= 1, approximated by a short fixed-point recursion).
struct GstConfig {
  double p = 1.0;
  double theta = 0.0;
  int n_iters = 3;
  double delta = 1e-5;

  /// Throws ValidationError unless 0 < p <= 1, theta >= 0, n_iters >= 1, delta > 0.
  void validate() const;
};

/// sign(y) * max(|y| - theta, 0). Throws ValidationError for theta < 0.
double soft(double y, double theta);

/// Dead-zone width of the l_p prox:
///   (2 theta (1-p))^(1/(2-p)) + theta p (2 theta (1-p))^((p-1)/(2-p)),
/// with 0^0 = 1 so that tau_1(theta) = theta.
double tau_p(double theta, double p);

/// 0 inside the dead zone |y| <= tau_p(theta); otherwise sign(y) * S_n where
/// S_0 = |y| and S_m = |y| - theta p (S_{m-1} + delta)^(p-1).
double gst(double y, const GstConfig& cfg);

/// Same as gst but skips validation; callers validate once per grid.
double gst_unchecked(double y, const GstConfig& cfg, double tau);

/// Brute-force minimizer of 0.5 (x - y)^2 + theta |x|^p over the grid
/// {k * grid_step} covering [-|y|-1, |y|+1]. Ties go to the smaller |x|.
double prox_oracle(double y, double theta, double p, double grid_step);

}  // namespace mgst
