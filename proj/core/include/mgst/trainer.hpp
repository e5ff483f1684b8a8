#pragma once

// Losses and a finite-difference Adam trainer for the per-stage scalars of
// an UnfoldConfig (mu, rho, theta1, theta2 per scale) and the shared p0.
// Transform weights are never trained.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgst/grid.hpp"
#include "mgst/unfold.hpp"

namespace mgst {

struct TrainConfig {
  double alpha = 0.05;   ///< kernel-loss weight
  double eps1 = 1e-3;    ///< Charbonnier constant
  double lr = 1e-4;
  double lr_final = 1e-5;
  /// Epoch (0-based) from which lr_final applies; -1 selects 80% of epochs.
  int drop_epoch = -1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double fd_step = 1e-4;  ///< relative central-difference step
  int epochs = 50;
  int batch_size = 1;
  std::uint64_t seed = 0;
  /// Probe evaluations run on up to this many threads (0 = worker_count()).
  int workers = 0;

  void validate() const;
  int resolved_drop_epoch() const;
  double lr_at(int epoch) const;
};

/// sum_k sqrt(|u_k - u_gt|^2 + eps1^2)
double charbonnier_loss(std::span<const Image> u_stages, const Image& u_gt, double eps1);
/// sum_k |h_k * u_gt - g|_1
double kernel_loss(std::span<const Kernel> h_stages, const Image& u_gt, const Image& g,
                   Boundary boundary = Boundary::periodic);
double total_loss(double charbonnier, double kernel, double alpha);

struct LossParts {
  double total = 0.0;
  double charbonnier = 0.0;
  double kernel = 0.0;
};

/// Loss of one unfolding run's trace against the ground truth.
LossParts trace_loss(const RunTrace& trace, const Image& u_gt, const Image& g, const TrainConfig& tc,
                     Boundary boundary);

using LossFn = std::function<double(std::span<const double>)>;

/// Central differences with delta_i = fd_step * max(1, |z_i|). A non-finite
/// probe raises NumericError carrying the component index.
std::vector<double> fd_gradient(const LossFn& loss, std::span<const double> z, double fd_step);

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

struct AdamSettings {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update of z in place.
void adam_step(std::vector<double>& z, std::span<const double> grad, OptimizerState& state,
               const AdamSettings& s);

/// Unconstrained coordinates of the trainable scalars. Per stage:
/// log mu, log rho, softplus^-1 theta1, softplus^-1 theta2[s]...; then p0.
std::vector<double> encode_params(const UnfoldConfig& cfg);
/// Inverse of encode_params; decoded values are clamped into their
/// feasible sets (mu, rho > 0; thetas >= 0; p0 finite).
void decode_params(std::span<const double> z, UnfoldConfig& cfg);
double softplus(double x);
double softplus_inverse(double y);

struct TrainSample {
  std::string name;
  Image g;
  Image u_gt;
  std::optional<Kernel> h_gt;  ///< not used by the loss
};

struct TrainLogRow {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossParts loss;        ///< batch mean at the pre-update parameters
  int failed_probes = 0;  ///< probes whose run raised DegenerateKernelError
  /// The previous update landed on a degenerate point; it was undone and
  /// retaken from the last finite point with a halved learning rate.
  bool rolled_back = false;
};

struct TrainResult {
  UnfoldConfig fitted;
  std::vector<TrainLogRow> log;
  LossParts initial;  ///< dataset mean at the initial parameters
  LossParts final;    ///< dataset mean at the fitted parameters
};

/// Mean loss over `samples` for the given configuration; +inf when a run
/// degenerates.
LossParts dataset_loss(std::span<const TrainSample> samples, const UnfoldConfig& cfg,
                       const TrainConfig& tc);

using TrainCallback = std::function<void(const TrainLogRow&)>;

TrainResult train(std::span<const TrainSample> samples, const TrainConfig& tc, const UnfoldConfig& init,
                  const TrainCallback& on_step = {});

std::string train_log_csv_header();
std::string train_log_csv_row(const TrainLogRow& row);

}  // namespace mgst
