#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "motionguide/rng.hpp"
#include "motionguide/schedule.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

// Batched model seam: predicted noise for z_t at per-sample timesteps.
// Conditioning is captured by the callable.
using DenoiseFn = std::function<Tensor(const Tensor& z_t, const std::vector<int>& t)>;

// Gradient of the summed classifier log-probability w.r.t. z_t (per-sample
// rows are independent), evaluated at a shared timestep.
using GuidanceGradFn = std::function<Tensor(const Tensor& z_t, int t)>;

enum class SamplerKind { ddpm, ddim };

struct GuidanceConfig {
  double lambda = 0.0;
  SamplerKind sampler = SamplerKind::ddim;
  int steps = 40;      // number of denoiser evaluations along the path
  double eta = 0.0;    // stochasticity for ddim; ddpm ignores it (always 1)
  std::uint64_t seed = 0;
  std::vector<int> step_mask;  // per-step guidance on/off; empty = on everywhere

  void validate(int T) const;
  static GuidanceConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct DiffusionState {
  Tensor z;              // (B,C,H,W), a draw of z_t
  int t = 0;
  int step_index = 0;    // position along timestep_path
  std::vector<Rng> rng;  // per-sample noise streams
};

// Descending timesteps T-1..0, steps+1 nodes, evenly spaced after rounding.
std::vector<int> timestep_path(int T, int steps);

// z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps. Differentiable in z0 and eps.
Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched);

// ||eps - model(z_t, t)||^2 averaged over the batch, with given draws.
Tensor denoising_loss_at(const DenoiseFn& model, const Tensor& z0, const std::vector<int>& t,
                         const Tensor& eps, const NoiseSchedule& sched);

// Draws t uniformly per sample (in batch order), then the noise tensor in
// flat order, and delegates. The draw order is part of the contract.
Tensor denoising_loss(const DenoiseFn& model, const Tensor& z0, const NoiseSchedule& sched,
                      Rng& rng);

// eps_hat = eps_pred - lambda * sqrt(1-abar_t) * grad_logp. lambda == 0
// returns eps_pred unchanged (bit-identical); negative lambda is rejected.
Tensor guided_epsilon(const Tensor& eps_pred, const Tensor& grad_logp, int t, double lambda,
                      const NoiseSchedule& sched);

// Fresh state at t = T-1 with z ~ N(0, I), one noise stream per sample.
// Streams are keyed by sample_offset + i, so chunked runs reproduce an
// unchunked run exactly when the offset tracks the global sample index.
DiffusionState init_state(long batch, Shape chw, const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, long sample_offset = 0);

// One reverse transition along the path. The final transition returns the
// clean estimate x0 (terminal node treated as fully denoised, no noise).
// guidance may be null only when lambda == 0.
DiffusionState ddim_step(DiffusionState state, const DenoiseFn& model,
                         const GuidanceGradFn* guidance, const GuidanceConfig& cfg,
                         const NoiseSchedule& sched);
DiffusionState ddpm_step(DiffusionState state, const DenoiseFn& model,
                         const GuidanceGradFn* guidance, const GuidanceConfig& cfg,
                         const NoiseSchedule& sched);

// Full reverse pass; output clamped to the pixel range [0,1].
Tensor sample(const DenoiseFn& model, const GuidanceGradFn* guidance, long batch, Shape chw,
              const GuidanceConfig& cfg, const NoiseSchedule& sched, long sample_offset = 0);

}  // namespace mg
