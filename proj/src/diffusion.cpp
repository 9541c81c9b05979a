#include "motionguide/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "motionguide/ops.hpp"

namespace mg {

void GuidanceConfig::validate(int T) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("GuidanceConfig: lambda must be finite and >= 0");
  if (steps < 1 || steps > T - 1)
    throw std::invalid_argument("GuidanceConfig: steps must lie in [1, T-1], got " +
                                std::to_string(steps) + " for T=" + std::to_string(T));
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("GuidanceConfig: eta must lie in [0,1]");
  if (!step_mask.empty() && step_mask.size() != static_cast<std::size_t>(steps))
    throw std::invalid_argument("GuidanceConfig: step_mask must match steps or be empty");
  for (int m : step_mask)
    if (m != 0 && m != 1)
      throw std::invalid_argument("GuidanceConfig: step_mask entries must be 0 or 1");
}

GuidanceConfig GuidanceConfig::from_json(const nlohmann::json& j) {
  GuidanceConfig cfg;
  cfg.lambda = j.value("lambda", 0.0);
  std::string kind = j.value("sampler", "ddim");
  if (kind == "ddpm")
    cfg.sampler = SamplerKind::ddpm;
  else if (kind == "ddim")
    cfg.sampler = SamplerKind::ddim;
  else
    throw std::invalid_argument("GuidanceConfig: unknown sampler '" + kind + "'");
  cfg.steps = j.value("steps", 40);
  cfg.eta = j.value("eta", 0.0);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.step_mask = j.value("step_mask", std::vector<int>{});
  return cfg;
}

nlohmann::json GuidanceConfig::to_json() const {
  return {{"lambda", lambda},
          {"sampler", sampler == SamplerKind::ddpm ? "ddpm" : "ddim"},
          {"steps", steps},
          {"eta", eta},
          {"seed", seed},
          {"step_mask", step_mask}};
}

std::vector<int> timestep_path(int T, int steps) {
  if (steps < 1 || steps > T - 1)
    throw std::invalid_argument("timestep_path: steps must lie in [1, T-1]");
  std::vector<int> path(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    double pos = static_cast<double>(T - 1) * (steps - k) / steps;
    path[static_cast<std::size_t>(k)] = static_cast<int>(std::lround(pos));
  }
  return path;
}

Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.T())
    throw std::invalid_argument("forward_diffuse: t=" + std::to_string(t) +
                                " outside schedule [0," + std::to_string(sched.T()) + ")");
  if (z0.shape() != eps.shape())
    throw std::invalid_argument("forward_diffuse: z0 " + shape_str(z0.shape()) +
                                " vs eps " + shape_str(eps.shape()));
  return add(scale(z0, sched.sqrt_alpha_bar(t)), scale(eps, sched.sqrt_one_minus_alpha_bar(t)));
}

Tensor denoising_loss_at(const DenoiseFn& model, const Tensor& z0, const std::vector<int>& t,
                         const Tensor& eps, const NoiseSchedule& sched) {
  if (z0.rank() != 4)
    throw std::invalid_argument("denoising_loss: z0 must be (B,C,H,W), got " +
                                shape_str(z0.shape()));
  if (z0.shape() != eps.shape())
    throw std::invalid_argument("denoising_loss: z0 " + shape_str(z0.shape()) + " vs eps " +
                                shape_str(eps.shape()));
  const long B = z0.dim(0);
  if (static_cast<long>(t.size()) != B)
    throw std::invalid_argument("denoising_loss: " + std::to_string(t.size()) +
                                " timesteps for batch " + std::to_string(B));
  const long per = z0.size() / B;
  Tensor z_t = Tensor::zeros(z0.shape());
  for (long i = 0; i < B; ++i) {
    int ti = t[static_cast<std::size_t>(i)];
    if (ti < 0 || ti >= sched.T())
      throw std::invalid_argument("denoising_loss: t=" + std::to_string(ti) +
                                  " outside schedule");
    z_t.array().segment(i * per, per) =
        sched.sqrt_alpha_bar(ti) * z0.array().segment(i * per, per) +
        sched.sqrt_one_minus_alpha_bar(ti) * eps.array().segment(i * per, per);
  }
  Tensor pred = model(z_t, t);
  if (pred.shape() != z0.shape())
    throw std::invalid_argument("denoising_loss: model output " + shape_str(pred.shape()) +
                                " does not match " + shape_str(z0.shape()));
  return mse(pred, eps);
}

Tensor denoising_loss(const DenoiseFn& model, const Tensor& z0, const NoiseSchedule& sched,
                      Rng& rng) {
  const long B = z0.dim(0);
  std::vector<int> t(static_cast<std::size_t>(B));
  for (long i = 0; i < B; ++i)
    t[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(sched.T()));
  Tensor eps = Tensor::randn(z0.shape(), rng);
  return denoising_loss_at(model, z0, t, eps, sched);
}

Tensor guided_epsilon(const Tensor& eps_pred, const Tensor& grad_logp, int t, double lambda,
                      const NoiseSchedule& sched) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw std::invalid_argument("guided_epsilon: lambda must be finite and >= 0");
  if (t < 0 || t >= sched.T())
    throw std::invalid_argument("guided_epsilon: t=" + std::to_string(t) + " outside schedule");
  if (lambda == 0.0) return eps_pred;
  if (eps_pred.shape() != grad_logp.shape())
    throw std::invalid_argument("guided_epsilon: eps " + shape_str(eps_pred.shape()) +
                                " vs grad " + shape_str(grad_logp.shape()));
  double s = lambda * sched.sqrt_one_minus_alpha_bar(t);
  return Tensor::from(eps_pred.shape(), eps_pred.array() - s * grad_logp.array());
}

DiffusionState init_state(long batch, Shape chw, const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, long sample_offset) {
  cfg.validate(sched.T());
  if (batch < 1) throw std::invalid_argument("init_state: batch must be >= 1");
  if (sample_offset < 0) throw std::invalid_argument("init_state: sample_offset must be >= 0");
  Shape full;
  full.push_back(batch);
  for (long d : chw) full.push_back(d);
  DiffusionState state;
  state.z = Tensor::zeros(full);
  state.t = sched.T() - 1;
  state.step_index = 0;
  Rng base = Rng::seeded(cfg.seed).split("sampler");
  const long per = numel(chw);
  state.rng.reserve(static_cast<std::size_t>(batch));
  for (long i = 0; i < batch; ++i) {
    Rng r = base.split(static_cast<std::uint64_t>(sample_offset + i));
    for (long k = 0; k < per; ++k) state.z.array()[i * per + k] = r.normal();
    state.rng.push_back(r);
  }
  return state;
}

namespace {

DiffusionState advance(DiffusionState state, const DenoiseFn& model,
                       const GuidanceGradFn* guidance, const GuidanceConfig& cfg,
                       const NoiseSchedule& sched, double eta) {
  cfg.validate(sched.T());
  if (cfg.lambda > 0.0 && guidance == nullptr)
    throw std::invalid_argument("sampler: guidance strength is positive but no classifier given");
  std::vector<int> path = timestep_path(sched.T(), cfg.steps);
  const int last = static_cast<int>(path.size()) - 1;
  if (state.step_index < 0 || state.step_index >= last)
    throw std::invalid_argument("sampler: state is already at the end of its path");
  if (state.t != path[static_cast<std::size_t>(state.step_index)])
    throw std::invalid_argument("sampler: state timestep " + std::to_string(state.t) +
                                " does not lie on the configured path");
  const long B = state.z.dim(0);
  if (state.rng.size() != static_cast<std::size_t>(B))
    throw std::invalid_argument("sampler: state carries " + std::to_string(state.rng.size()) +
                                " noise streams for batch " + std::to_string(B));

  const int t = state.t;
  const int t_next = path[static_cast<std::size_t>(state.step_index) + 1];
  const bool terminal = state.step_index + 1 == last;

  std::vector<int> t_vec(static_cast<std::size_t>(B), t);
  Tensor eps_hat = model(state.z, t_vec);
  if (eps_hat.shape() != state.z.shape())
    throw std::invalid_argument("sampler: model output " + shape_str(eps_hat.shape()) +
                                " does not match state " + shape_str(state.z.shape()));

  bool guide_now = cfg.lambda > 0.0;
  if (guide_now && !cfg.step_mask.empty())
    guide_now = cfg.step_mask[static_cast<std::size_t>(state.step_index)] == 1;
  if (guide_now) {
    Tensor g = (*guidance)(state.z, t);
    eps_hat = guided_epsilon(eps_hat, g, t, cfg.lambda, sched);
  }

  const double abar_t = sched.alpha_bar(t);
  const double abar_n = terminal ? 1.0 : sched.alpha_bar(t_next);
  Eigen::ArrayXd x0 =
      (state.z.array() - std::sqrt(1.0 - abar_t) * eps_hat.array()) / std::sqrt(abar_t);

  Eigen::ArrayXd z_next;
  if (terminal) {
    z_next = std::move(x0);
  } else {
    double sigma = eta * std::sqrt((1.0 - abar_n) / (1.0 - abar_t)) *
                   std::sqrt(1.0 - abar_t / abar_n);
    double keep = std::sqrt(std::max(1.0 - abar_n - sigma * sigma, 0.0));
    z_next = std::sqrt(abar_n) * x0 + keep * eps_hat.array();
    if (sigma > 0.0) {
      const long per = state.z.size() / B;
      for (long i = 0; i < B; ++i) {
        Rng& r = state.rng[static_cast<std::size_t>(i)];
        for (long k = 0; k < per; ++k) z_next[i * per + k] += sigma * r.normal();
      }
    }
  }

  state.z = Tensor::from(state.z.shape(), std::move(z_next));
  state.t = t_next;
  state.step_index += 1;
  return state;
}

}  // namespace

DiffusionState ddim_step(DiffusionState state, const DenoiseFn& model,
                         const GuidanceGradFn* guidance, const GuidanceConfig& cfg,
                         const NoiseSchedule& sched) {
  return advance(std::move(state), model, guidance, cfg, sched, cfg.eta);
}

DiffusionState ddpm_step(DiffusionState state, const DenoiseFn& model,
                         const GuidanceGradFn* guidance, const GuidanceConfig& cfg,
                         const NoiseSchedule& sched) {
  return advance(std::move(state), model, guidance, cfg, sched, 1.0);
}

Tensor sample(const DenoiseFn& model, const GuidanceGradFn* guidance, long batch, Shape chw,
              const GuidanceConfig& cfg, const NoiseSchedule& sched, long sample_offset) {
  DiffusionState state = init_state(batch, std::move(chw), cfg, sched, sample_offset);
  for (int k = 0; k < cfg.steps; ++k) {
    state = cfg.sampler == SamplerKind::ddpm
                ? ddpm_step(std::move(state), model, guidance, cfg, sched)
                : ddim_step(std::move(state), model, guidance, cfg, sched);
  }
  Tensor out = Tensor::from(state.z.shape(), state.z.array().max(0.0).min(1.0));
  return out;
}

}  // namespace mg
