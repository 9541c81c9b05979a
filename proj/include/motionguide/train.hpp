#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "motionguide/classifier.hpp"
#include "motionguide/denoiser.hpp"
#include "motionguide/schedule.hpp"

namespace mg {

struct TrainConfig {
  int steps = 2000;
  double lr = 1e-3;
  int batch = 32;
  std::uint64_t seed = 0;
  int eval_every = 50;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& defaults);

  static TrainConfig denoiser_defaults() { return {2000, 1e-3, 32, 0, 50}; }
  static TrainConfig classifier_defaults() { return {2000, 1e-3, 64, 0, 50}; }
  // Settings sized for a long run at large-model scale; accepted, not the default.
  static TrainConfig long_run() { return {20000, 1e-5, 32, 0, 500}; }
};

struct DenoiseDataset {
  Tensor z0;    // (N,1,32,32)
  Tensor cond;  // (N,16)
};

struct LabeledDataset {
  Tensor z0;  // (N,1,32,32)
  std::vector<int> labels;
};

struct TrainResult {
  double initial_heldout = 0.0;
  double final_heldout = 0.0;
  double final_heldout_accuracy = 0.0;  // classifier runs only
  int steps_run = 0;
};

// Returns the pre-clip global norm; scales gradients so it never exceeds max_norm.
double clip_global_norm(std::vector<Tensor>& params, double max_norm);
void sgd_step(std::vector<Tensor>& params, double lr);

// Minibatch training on the denoising objective. A tail split (after a seeded shuffle)
// is held out and scored with frozen (t, noise) draws so the curve is
// comparable across steps. Divergence aborts with a diagnostic. Appends
// "step,loss,held_out_loss" lines to loss_csv when given.
TrainResult train_denoiser(Denoiser& model, const DenoiseDataset& data,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           const std::optional<std::filesystem::path>& loss_csv = {});

// Binary cross-entropy on noisy latents over the frozen encoder; only the
// head moves. Rejects single-class datasets; verifies the encoder bytes were
// untouched afterwards.
TrainResult train_classifier(GuidanceClassifier& clf, const LabeledDataset& data,
                             const NoiseSchedule& sched, const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& loss_csv = {});

// Accuracy of sign(logit) against labels with t drawn uniformly from
// [0, t_max] and noise fixed by seed.
double classifier_accuracy(const GuidanceClassifier& clf, const LabeledDataset& data,
                           const NoiseSchedule& sched, int t_max, std::uint64_t seed);

Tensor gather_rows(const Tensor& src, const std::vector<long>& idx);

}  // namespace mg
