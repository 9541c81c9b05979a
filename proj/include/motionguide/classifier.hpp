#pragma once

#include <filesystem>

#include "motionguide/denoiser.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

// Binary judgment head over the denoiser's frozen deepest encoder stage.
// Features are pooled to a 64-vector and mapped to one logit. The encoder is
// evaluated under a neutral (all-zero) condition so the verdict depends on
// image content alone; the timestep rides the encoder's own embedding path.
class GuidanceClassifier {
 public:
  GuidanceClassifier(const Denoiser* encoder, Rng rng);

  // Spatially pooled frozen-encoder representation the head reads, (B,64).
  Tensor features(const Tensor& z_t, const std::vector<int>& t) const;

  // (B,1,32,32) noisy latents at per-sample timesteps -> (B,1) logits.
  Tensor logits(const Tensor& z_t, const std::vector<int>& t) const;

  // log p(positive | z_t) for a single latent; strictly negative.
  double logp(const Tensor& z_t, int t) const;

  // d/dz_t of the summed log p over the batch; rows are independent.
  // Computed on a private tape, parameter gradients are never touched.
  Tensor input_grad(const Tensor& z_t, int t) const;

  std::vector<Tensor> head_params();
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  const Denoiser& encoder() const { return *encoder_; }

  void save(const std::filesystem::path& dir, const json& extra_meta = json::object()) const;
  // Binds to `encoder` and refuses checkpoints trained against different
  // encoder weights.
  static GuidanceClassifier load(const std::filesystem::path& dir, const Denoiser* encoder);

 private:
  const Denoiser* encoder_;
  Tensor head_w_;  // (64,1)
  Tensor head_b_;  // (1)
};

}  // namespace mg
