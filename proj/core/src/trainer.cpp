#include "mgst/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "mgst/errors.hpp"
#include "mgst/parallel.hpp"
#include "mgst/random.hpp"

namespace mgst {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  if (!(eps1 > 0.0)) throw ValidationError("eps1 must be > 0");
  if (!(fd_step > 0.0)) throw ValidationError("fd_step must be > 0");
  if (!(lr > 0.0) || !(lr_final > 0.0)) throw ValidationError("learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam epsilon must be > 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (drop_epoch < -1) throw ValidationError("drop_epoch must be >= 0 (or -1 for the default)");
}

int TrainConfig::resolved_drop_epoch() const {
  return drop_epoch >= 0 ? drop_epoch : static_cast<int>(std::floor(0.8 * epochs));
}

double TrainConfig::lr_at(int epoch) const { return epoch < resolved_drop_epoch() ? lr : lr_final; }

// ---------------------------------------------------------------- losses

double charbonnier_loss(std::span<const Image> u_stages, const Image& u_gt, double eps1) {
  if (!(eps1 > 0.0)) throw ValidationError("eps1 must be > 0");
  double total = 0.0;
  for (const Image& u : u_stages) {
    if (!u.same_shape(u_gt)) throw DimensionError("charbonnier_loss: stage output differs in shape");
    double se = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = u.values()[i] - u_gt.values()[i];
      se += d * d;
    }
    total += std::sqrt(se + eps1 * eps1);
  }
  return total;
}

double kernel_loss(std::span<const Kernel> h_stages, const Image& u_gt, const Image& g, Boundary boundary) {
  if (!u_gt.same_shape(g)) throw DimensionError("kernel_loss: ground truth and observation differ in shape");
  double total = 0.0;
  for (const Kernel& h : h_stages) total += sum_abs(convolve(u_gt, h, boundary) - g);
  return total;
}

double total_loss(double charbonnier, double kernel, double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  return charbonnier + alpha * kernel;
}

LossParts trace_loss(const RunTrace& trace, const Image& u_gt, const Image& g, const TrainConfig& tc,
                     Boundary boundary) {
  std::vector<Image> us;
  std::vector<Kernel> hs;
  for (const auto& rec : trace.stages) {
    us.push_back(rec.u);
    hs.push_back(rec.h);
  }
  LossParts p;
  p.charbonnier = charbonnier_loss(us, u_gt, tc.eps1);
  p.kernel = tc.alpha > 0.0 ? kernel_loss(hs, u_gt, g, boundary) : 0.0;
  p.total = total_loss(p.charbonnier, p.kernel, tc.alpha);
  return p;
}

// ---------------------------------------------------------------- optimizer

std::vector<double> fd_gradient(const LossFn& loss, std::span<const double> z, double fd_step) {
  if (!(fd_step > 0.0)) throw ValidationError("fd_step must be > 0");
  std::vector<double> grad(z.size());
  std::vector<double> probe(z.begin(), z.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double delta = fd_step * std::max(1.0, std::abs(z[i]));
    probe[i] = z[i] + delta;
    const double up = loss(probe);
    probe[i] = z[i] - delta;
    const double down = loss(probe);
    probe[i] = z[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError(static_cast<int>(i), fmt::format("non-finite loss probing component {}", i));
    }
    grad[i] = (up - down) / (2.0 * delta);
  }
  return grad;
}

void adam_step(std::vector<double>& z, std::span<const double> grad, OptimizerState& state,
               const AdamSettings& s) {
  if (grad.size() != z.size()) throw DimensionError("adam_step: gradient and parameters differ in length");
  if (state.m.empty()) state.m.assign(z.size(), 0.0);
  if (state.v.empty()) state.v.assign(z.size(), 0.0);
  if (state.m.size() != z.size() || state.v.size() != z.size()) {
    throw DimensionError("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < z.size(); ++i) {
    state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * grad[i];
    state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    z[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

// ---------------------------------------------------------------- parameter codec

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  y = std::max(y, 1e-30);
  return y > 30.0 ? y : std::log(std::expm1(y));
}

namespace {

constexpr double kMinStep = 1e-12;
constexpr double kMaxStep = 1e12;
constexpr double kMaxP0 = 30.0;

double decode_step(double z) { return std::clamp(std::exp(z), kMinStep, kMaxStep); }

}  // namespace

std::vector<double> encode_params(const UnfoldConfig& cfg) {
  std::vector<double> z;
  for (const auto& sp : cfg.params) {
    z.push_back(std::log(std::clamp(sp.mu, kMinStep, kMaxStep)));
    z.push_back(std::log(std::clamp(sp.rho, kMinStep, kMaxStep)));
    z.push_back(softplus_inverse(sp.theta1));
    for (double t : sp.theta2) z.push_back(softplus_inverse(t));
  }
  z.push_back(cfg.p0);
  return z;
}

void decode_params(std::span<const double> z, UnfoldConfig& cfg) {
  std::size_t expected = 1;
  for (const auto& sp : cfg.params) expected += 3 + sp.theta2.size();
  if (z.size() != expected) {
    throw DimensionError(fmt::format("parameter vector has {} entries, configuration needs {}", z.size(), expected));
  }
  std::size_t i = 0;
  for (auto& sp : cfg.params) {
    sp.mu = decode_step(z[i++]);
    sp.rho = decode_step(z[i++]);
    sp.theta1 = softplus(z[i++]);
    for (double& t : sp.theta2) t = softplus(z[i++]);
  }
  cfg.p0 = std::clamp(z[i], -kMaxP0, kMaxP0);
}

// ---------------------------------------------------------------- training loop

namespace {

LossParts batch_loss(std::span<const TrainSample* const> batch, const UnfoldConfig& cfg, const TrainConfig& tc) {
  LossParts sum;
  for (const TrainSample* s : batch) {
    LossParts p;
    try {
      p = trace_loss(run(s->g, cfg).trace, s->u_gt, s->g, tc, cfg.boundary);
    } catch (const DegenerateKernelError&) {
      return {kInf, kInf, kInf};
    }
    sum.total += p.total;
    sum.charbonnier += p.charbonnier;
    sum.kernel += p.kernel;
  }
  const double n = static_cast<double>(batch.size());
  return {sum.total / n, sum.charbonnier / n, sum.kernel / n};
}

}  // namespace

LossParts dataset_loss(std::span<const TrainSample> samples, const UnfoldConfig& cfg, const TrainConfig& tc) {
  std::vector<const TrainSample*> all;
  for (const auto& s : samples) all.push_back(&s);
  return batch_loss(all, cfg, tc);
}

TrainResult train(std::span<const TrainSample> samples, const TrainConfig& tc, const UnfoldConfig& init,
                  const TrainCallback& on_step) {
  tc.validate();
  init.validate();
  if (samples.empty()) throw ValidationError("training set is empty");

  TrainResult result;
  result.fitted = init;
  result.initial = dataset_loss(samples, init, tc);

  std::vector<double> z = encode_params(init);
  decode_params(z, result.fitted);
  OptimizerState state;
  const std::size_t n_params = z.size();
  long step = 0;

  // Last point whose center loss was finite, with the optimizer state and
  // gradient taken there, for rolling back an update that degenerates.
  std::optional<std::vector<double>> good_z;
  OptimizerState good_state;
  std::vector<double> good_grad;
  double backoff = 1.0;

  std::vector<std::size_t> order(samples.size());
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch), 0x7368756666));
    std::shuffle(order.begin(), order.end(), rng);
    const AdamSettings adam{tc.lr_at(epoch), tc.beta1, tc.beta2, tc.adam_eps};

    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<const TrainSample*> batch;
      for (std::size_t j = start; j < std::min(order.size(), start + tc.batch_size); ++j) {
        batch.push_back(&samples[order[j]]);
      }

      // Slot 0 is the center; 2i+1 / 2i+2 are the +/- probes of component i.
      std::vector<LossParts> probes(2 * n_params + 1);
      std::vector<double> deltas(n_params);
      for (std::size_t i = 0; i < n_params; ++i) deltas[i] = tc.fd_step * std::max(1.0, std::abs(z[i]));
      parallel_for(
          probes.size(),
          [&](std::size_t slot) {
            std::vector<double> zp = z;
            if (slot > 0) {
              const std::size_t i = (slot - 1) / 2;
              zp[i] += slot % 2 == 1 ? deltas[i] : -deltas[i];
            }
            UnfoldConfig cfg = result.fitted;
            decode_params(zp, cfg);
            probes[slot] = batch_loss(batch, cfg, tc);
          },
          tc.workers);

      TrainLogRow row;
      row.step = step;
      row.epoch = epoch;
      row.lr = adam.lr;
      row.loss = probes[0];
      const double center = probes[0].total;
      if (!std::isfinite(center) && good_z) {
        z = *good_z;
        state = good_state;
        backoff *= 0.5;
        AdamSettings retry = adam;
        retry.lr *= backoff;
        adam_step(z, good_grad, state, retry);
        decode_params(z, result.fitted);
        row.rolled_back = true;
        for (const auto& pr : probes) row.failed_probes += !std::isfinite(pr.total);
        result.log.push_back(row);
        if (on_step) on_step(row);
        ++step;
        continue;
      }
      std::vector<double> grad(n_params, 0.0);
      for (std::size_t i = 0; i < n_params; ++i) {
        const double up = probes[2 * i + 1].total;
        const double down = probes[2 * i + 2].total;
        row.failed_probes += !std::isfinite(up) + !std::isfinite(down);
        if (std::isfinite(up) && std::isfinite(down)) {
          grad[i] = (up - down) / (2.0 * deltas[i]);
        } else if (std::isfinite(center) && std::isfinite(down)) {
          grad[i] = (center - down) / deltas[i];  // +probe failed: backward difference
        } else if (std::isfinite(center) && std::isfinite(up)) {
          grad[i] = (up - center) / deltas[i];
        }
      }
      if (std::isfinite(center)) {
        good_z = z;
        good_state = state;
        good_grad = grad;
        backoff = std::min(1.0, 2.0 * backoff);
      }
      adam_step(z, grad, state, adam);
      decode_params(z, result.fitted);
      result.log.push_back(row);
      if (on_step) on_step(row);
      ++step;
    }
  }
  result.final = dataset_loss(samples, result.fitted, tc);
  if (!std::isfinite(result.final.total) && good_z) {
    decode_params(*good_z, result.fitted);
    result.final = dataset_loss(samples, result.fitted, tc);
  }
  return result;
}

std::string train_log_csv_header() { return "step,epoch,lr,loss,char,kern,failed_probes,rolled_back\n"; }

std::string train_log_csv_row(const TrainLogRow& r) {
  return fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{:d}\n", r.step, r.epoch, r.lr, r.loss.total,
                     r.loss.charbonnier, r.loss.kernel, r.failed_probes, r.rolled_back ? 1 : 0);
}

}  // namespace mgst
