#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "motionguide/corpus.hpp"
#include "motionguide/diffusion.hpp"
#include "motionguide/dynamics.hpp"
#include "motionguide/eval.hpp"
#include "motionguide/labeling.hpp"
#include "motionguide/train.hpp"

namespace mg {

// One experiment end to end: data, labels, models, guided sampling, metrics.
// All stage seeds derive from master_seed by name, so two runs with the same
// config produce byte-identical artifacts at any worker count.
struct ExperimentConfig {
  std::filesystem::path out_dir = "run";
  std::uint64_t master_seed = 1;
  int workers = 1;

  CorpusConfig corpus;
  NoiseSchedule schedule = NoiseSchedule::defaults();
  DynamicsParams dynamics;
  LabelingParams labeling;
  TrainConfig denoiser_train = TrainConfig::denoiser_defaults();
  TrainConfig classifier_train = TrainConfig::classifier_defaults();

  SamplerKind sampler = SamplerKind::ddim;
  int sample_steps = 40;
  double sample_eta = 0.0;
  long sample_count = 256;
  std::vector<double> lambdas = {0.0, 1.0, 2.0, 4.0, 8.0};

  DynamicsVariant eval_variant = DynamicsVariant::A;
  double motion_threshold = 0.25;  // px/frame on pooled mean flow magnitude
  bool run_transfer = true;
  double transfer_lambda = 4.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// Guidance conditions in reports: "baseline" is unguided, "image_prior" uses
// the classifier trained on static-image labels, "video_judge" the one
// trained on full video labels.
struct ReportRow {
  std::string condition;
  double lambda = 0.0;
  double dyn_degree = 0.0;
  double mean_logit = 0.0;
  double logit_se = 0.0;
  double positive_rate = 0.0;  // video-judge labels regenerated on the samples
  long samples = 0;

  nlohmann::json to_json() const;
  static ReportRow from_json(const nlohmann::json& j);
};

struct TransferRow {
  std::string classifier;  // "none", "judge_A", "judge_B"
  std::string dynamics;    // downstream variant the samples were scored under
  double lambda = 0.0;
  double dyn_degree = 0.0;
  long samples = 0;

  nlohmann::json to_json() const;
  static TransferRow from_json(const nlohmann::json& j);
};

struct PipelineResult {
  std::vector<ReportRow> rows;
  std::vector<TransferRow> transfer;
  double corpus_label_rate = 0.0;   // positive fraction of judge labels, variant A
  double classifier_acc = 0.0;      // judge_A held-out accuracy at t <= T/4
  double denoiser_heldout = 0.0;

  nlohmann::json to_json() const;
  static PipelineResult from_json(const nlohmann::json& j);
};

// Chunked guided sampling; chunk size is fixed, per-sample noise streams use
// global indices, so output does not depend on workers. clf may be null only
// when gcfg.lambda == 0.
Tensor sample_images(const Denoiser& model, const GuidanceClassifier* clf, const Tensor& cond,
                     const GuidanceConfig& gcfg, const NoiseSchedule& sched, int workers = 1);

// Runs every stage under cfg.out_dir, reusing finished stages whose content
// keys still match. Progress goes to stdout; failures throw with the stage
// name in the message.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

// Writes results.csv, results.md, transfer.csv, sweep.svg, report.json and
// manifest.json under out_dir/eval.
void emit_report(const ExperimentConfig& cfg, const PipelineResult& result);

// Rehydrates a finished run from out_dir/eval/report.json.
PipelineResult load_result(const std::filesystem::path& out_dir);

}  // namespace mg
