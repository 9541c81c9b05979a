#include "motionguide/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "motionguide/parallel.hpp"
#include "motionguide/serialize.hpp"

namespace mg {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  corpus.validate();
  dynamics.validate();
  labeling.validate();
  denoiser_train.validate();
  classifier_train.validate();
  if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
  if (sample_count < 1)
    throw std::invalid_argument("ExperimentConfig: sample_count must be >= 1");
  GuidanceConfig g;
  g.steps = sample_steps;
  g.eta = sample_eta;
  g.sampler = sampler;
  g.validate(schedule.T());
  if (lambdas.empty()) throw std::invalid_argument("ExperimentConfig: lambdas is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0) || !std::isfinite(lambdas[i]))
      throw std::invalid_argument("ExperimentConfig: lambdas must be finite and >= 0");
    if (i > 0 && lambdas[i] <= lambdas[i - 1])
      throw std::invalid_argument("ExperimentConfig: lambdas must increase strictly");
  }
  if (run_transfer && !(transfer_lambda > 0.0))
    throw std::invalid_argument("ExperimentConfig: transfer_lambda must be > 0");
  if (!(motion_threshold >= 0.0))
    throw std::invalid_argument("ExperimentConfig: motion_threshold must be >= 0");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"out_dir", out_dir.string()},
          {"master_seed", master_seed},
          {"workers", workers},
          {"corpus", corpus.to_json()},
          {"schedule", schedule.to_json()},
          {"dynamics", dynamics.to_json()},
          {"labeling", labeling.to_json()},
          {"denoiser_train", denoiser_train.to_json()},
          {"classifier_train", classifier_train.to_json()},
          {"sampling",
           {{"sampler", sampler == SamplerKind::ddpm ? "ddpm" : "ddim"},
            {"steps", sample_steps},
            {"eta", sample_eta},
            {"count", sample_count}}},
          {"lambdas", lambdas},
          {"eval",
           {{"variant", variant_name(eval_variant)},
            {"motion_threshold", motion_threshold}}},
          {"transfer", {{"enabled", run_transfer}, {"lambda", transfer_lambda}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.out_dir = j.value("out_dir", std::string("run"));
  c.master_seed = j.value("master_seed", std::uint64_t{1});
  c.workers = j.value("workers", 1);
  if (j.contains("corpus")) c.corpus = CorpusConfig::from_json(j.at("corpus"));
  if (j.contains("schedule")) c.schedule = NoiseSchedule::from_json(j.at("schedule"));
  if (j.contains("dynamics")) c.dynamics = DynamicsParams::from_json(j.at("dynamics"));
  if (j.contains("labeling")) c.labeling = LabelingParams::from_json(j.at("labeling"));
  c.denoiser_train = TrainConfig::from_json(j.value("denoiser_train", nlohmann::json::object()),
                                            TrainConfig::denoiser_defaults());
  c.classifier_train = TrainConfig::from_json(
      j.value("classifier_train", nlohmann::json::object()), TrainConfig::classifier_defaults());
  if (j.contains("sampling")) {
    const nlohmann::json& s = j.at("sampling");
    std::string kind = s.value("sampler", "ddim");
    if (kind == "ddpm")
      c.sampler = SamplerKind::ddpm;
    else if (kind == "ddim")
      c.sampler = SamplerKind::ddim;
    else
      throw std::invalid_argument("ExperimentConfig: unknown sampler '" + kind + "'");
    c.sample_steps = s.value("steps", c.sample_steps);
    c.sample_eta = s.value("eta", c.sample_eta);
    c.sample_count = s.value("count", c.sample_count);
  }
  if (j.contains("lambdas")) c.lambdas = j.at("lambdas").get<std::vector<double>>();
  if (j.contains("eval")) {
    const nlohmann::json& e = j.at("eval");
    c.eval_variant = variant_from_name(e.value("variant", std::string("A")));
    c.motion_threshold = e.value("motion_threshold", c.motion_threshold);
  }
  if (j.contains("transfer")) {
    const nlohmann::json& t = j.at("transfer");
    c.run_transfer = t.value("enabled", c.run_transfer);
    c.transfer_lambda = t.value("lambda", c.transfer_lambda);
  }
  c.validate();
  return c;
}

nlohmann::json ReportRow::to_json() const {
  return {{"condition", condition},   {"lambda", lambda},
          {"dyn_degree", dyn_degree}, {"mean_logit", mean_logit},
          {"logit_se", logit_se},     {"positive_rate", positive_rate},
          {"samples", samples}};
}

ReportRow ReportRow::from_json(const nlohmann::json& j) {
  ReportRow r;
  r.condition = j.at("condition").get<std::string>();
  r.lambda = j.at("lambda").get<double>();
  r.dyn_degree = j.at("dyn_degree").get<double>();
  r.mean_logit = j.at("mean_logit").get<double>();
  r.logit_se = j.at("logit_se").get<double>();
  r.positive_rate = j.at("positive_rate").get<double>();
  r.samples = j.at("samples").get<long>();
  return r;
}

nlohmann::json TransferRow::to_json() const {
  return {{"classifier", classifier},
          {"dynamics", dynamics},
          {"lambda", lambda},
          {"dyn_degree", dyn_degree},
          {"samples", samples}};
}

TransferRow TransferRow::from_json(const nlohmann::json& j) {
  TransferRow r;
  r.classifier = j.at("classifier").get<std::string>();
  r.dynamics = j.at("dynamics").get<std::string>();
  r.lambda = j.at("lambda").get<double>();
  r.dyn_degree = j.at("dyn_degree").get<double>();
  r.samples = j.at("samples").get<long>();
  return r;
}

nlohmann::json PipelineResult::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const ReportRow& r : rows) rs.push_back(r.to_json());
  nlohmann::json ts = nlohmann::json::array();
  for (const TransferRow& t : transfer) ts.push_back(t.to_json());
  return {{"rows", std::move(rs)},
          {"transfer", std::move(ts)},
          {"corpus_label_rate", corpus_label_rate},
          {"classifier_acc", classifier_acc},
          {"denoiser_heldout", denoiser_heldout}};
}

PipelineResult PipelineResult::from_json(const nlohmann::json& j) {
  PipelineResult r;
  for (const nlohmann::json& row : j.at("rows")) r.rows.push_back(ReportRow::from_json(row));
  for (const nlohmann::json& row : j.at("transfer"))
    r.transfer.push_back(TransferRow::from_json(row));
  r.corpus_label_rate = j.at("corpus_label_rate").get<double>();
  r.classifier_acc = j.at("classifier_acc").get<double>();
  r.denoiser_heldout = j.at("denoiser_heldout").get<double>();
  return r;
}

Tensor sample_images(const Denoiser& model, const GuidanceClassifier* clf, const Tensor& cond,
                     const GuidanceConfig& gcfg, const NoiseSchedule& sched, int workers) {
  gcfg.validate(sched.T());
  if (cond.rank() != 2 || cond.dim(1) != Denoiser::kCond)
    throw std::invalid_argument("sample_images: cond must be (N,16), got " +
                                shape_str(cond.shape()));
  if (gcfg.lambda > 0.0 && clf == nullptr)
    throw std::invalid_argument("sample_images: lambda > 0 needs a classifier");
  const long n = cond.dim(0);
  const long chunk = 64;  // fixed so results never depend on the worker count
  const long per = Denoiser::kImage * Denoiser::kImage;
  Tensor out = Tensor::zeros({n, 1, Denoiser::kImage, Denoiser::kImage});
  const long n_chunks = (n + chunk - 1) / chunk;
  parallel_for(n_chunks, workers, [&](long ci) {
    const long lo = ci * chunk;
    const long b = std::min(chunk, n - lo);
    std::vector<long> idx(static_cast<std::size_t>(b));
    std::iota(idx.begin(), idx.end(), lo);
    Tensor cond_b = gather_rows(cond, idx);
    DenoiseFn fn = [&model, &cond_b](const Tensor& z, const std::vector<int>& t) {
      return model.forward(z, cond_b, t);
    };
    GuidanceGradFn gfn;
    const GuidanceGradFn* gptr = nullptr;
    if (clf != nullptr && gcfg.lambda > 0.0) {
      gfn = [clf](const Tensor& z, int t) { return clf->input_grad(z, t); };
      gptr = &gfn;
    }
    Tensor s = sample(fn, gptr, b, {1, Denoiser::kImage, Denoiser::kImage}, gcfg, sched, lo);
    out.array().segment(lo * per, b * per) = s.array();
  });
  return out;
}

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
  Rng r = Rng::seeded(master).split(name);
  return r.next_u64();
}

std::string stage_key(const std::string& text) { return hash_hex(text); }

bool stage_valid(const fs::path& dir, const std::string& key) {
  try {
    return read_json(dir / "stage.json").at("key").get<std::string>() == key;
  } catch (const std::exception&) {
    return false;
  }
}

void mark_stage(const fs::path& dir, const std::string& key) {
  fs::create_directories(dir);
  write_json(dir / "stage.json", {{"key", key}});
}

struct StageClock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void log_stage(const std::string& name, const std::string& detail, double secs, bool cached) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1fs", secs);
  std::cout << "[pipeline] " << name << ": " << detail << (cached ? " (cached)" : "")
            << " [" << buf << "]" << std::endl;
}

std::string lambda_tag(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

std::vector<Frame> tensor_to_frames(const Tensor& t) {
  const long per = Frame::kSize * Frame::kSize;
  const long n = t.size() / per;
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) frames.push_back(tensor_row_to_frame(t, i));
  return frames;
}

struct LabelSet {
  std::vector<int> labels;
  double positive_rate = 0.0;
  std::string key;
};

LabelSet load_label_set(const fs::path& file) {
  nlohmann::json j = read_json(file);
  LabelSet s;
  s.labels = j.at("label_values").get<std::vector<int>>();
  s.positive_rate = j.at("positive_rate").get<double>();
  s.key = j.at("key").get<std::string>();
  return s;
}

// Metrics for one batch of generated images, scored against the judge
// classifier and the downstream dynamics.
struct SampleMetrics {
  double dyn_degree = 0.0;
  double mean_logit = 0.0;
  double logit_se = 0.0;
  double positive_rate = 0.0;
};

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  write_json(out / "config.json", cfg.to_json());

  PipelineResult result;

  // ---- corpus ----
  CorpusConfig ccfg = cfg.corpus;
  ccfg.seed = derive_seed(cfg.master_seed, "corpus");
  const std::string corpus_key = stage_key(ccfg.to_json().dump());
  const fs::path corpus_dir = out / "corpus";
  Corpus corpus;
  {
    StageClock clock;
    bool cached = stage_valid(corpus_dir, corpus_key);
    try {
      if (cached) {
        corpus = load_corpus(corpus_dir.string());
      } else {
        corpus = generate_corpus(ccfg);
        save_corpus(corpus_dir.string(), corpus);
        mark_stage(corpus_dir, corpus_key);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage corpus: " + std::string(e.what()));
    }
    log_stage("corpus", std::to_string(corpus.size()) + " items, " +
                            std::to_string(corpus.prompts.size()) + " prompts",
              clock.seconds(), cached);
  }
  const Tensor corpus_images = corpus.images_tensor();
  const Tensor corpus_cond = corpus.cond_tensor();

  // ---- labels ----
  const fs::path labels_dir = out / "labels";
  fs::create_directories(labels_dir);
  auto judge_labels = [&](DynamicsVariant variant) -> LabelSet {
    const std::string vname = variant_name(variant);
    const std::uint64_t seed = derive_seed(cfg.master_seed, std::string("labels_") + vname);
    const std::string key =
        stage_key(corpus_key + "|" + cfg.labeling.to_json().dump() + "|" +
                  cfg.dynamics.to_json().dump() + "|" + vname + "|" + std::to_string(seed));
    const fs::path file = labels_dir / (std::string("judge_") + vname + ".json");
    StageClock clock;
    if (fs::exists(file)) {
      try {
        LabelSet cached = load_label_set(file);
        if (cached.key == key) {
          log_stage(std::string("labels judge_") + vname,
                    "positive rate " + format_double(cached.positive_rate), clock.seconds(),
                    true);
          return cached;
        }
      } catch (const std::exception&) {
      }
    }
    try {
      std::vector<LabeledPair> pairs = label_corpus(corpus.images, cfg.dynamics, variant,
                                                    cfg.labeling, seed, cfg.workers);
      LabelSet s;
      s.key = key;
      long positives = 0;
      std::map<std::string, long> stages;
      nlohmann::json detail = nlohmann::json::array();
      for (const LabeledPair& p : pairs) {
        s.labels.push_back(p.label);
        positives += p.label;
        stages[stage_name(p.stage)] += 1;
        detail.push_back(p.to_json());
      }
      s.positive_rate = static_cast<double>(positives) / static_cast<double>(pairs.size());
      nlohmann::json j = {{"key", key},
                          {"variant", vname},
                          {"labeling", cfg.labeling.to_json()},
                          {"dynamics", cfg.dynamics.to_json()},
                          {"seed", seed},
                          {"positive_rate", s.positive_rate},
                          {"stage_counts", stages},
                          {"label_values", s.labels},
                          {"items", std::move(detail)}};
      write_json(file, j);
      log_stage(std::string("labels judge_") + vname,
                "positive rate " + format_double(s.positive_rate), clock.seconds(), false);
      return s;
    } catch (const std::exception& e) {
      throw std::runtime_error("stage labels judge_" + vname + ": " + std::string(e.what()));
    }
  };

  LabelSet labels_A = judge_labels(DynamicsVariant::A);
  result.corpus_label_rate = labels_A.positive_rate;

  LabelSet labels_prior;
  {
    const std::string key = stage_key(corpus_key + "|image_prior|" + cfg.labeling.to_json().dump());
    const fs::path file = labels_dir / "image_prior.json";
    StageClock clock;
    bool cached = false;
    if (fs::exists(file)) {
      try {
        LabelSet c = load_label_set(file);
        if (c.key == key) {
          labels_prior = c;
          cached = true;
        }
      } catch (const std::exception&) {
      }
    }
    if (!cached) {
      try {
        labels_prior.labels = label_image_priors(corpus.images, cfg.labeling);
        labels_prior.key = key;
        long positives = std::accumulate(labels_prior.labels.begin(), labels_prior.labels.end(), 0L);
        labels_prior.positive_rate =
            static_cast<double>(positives) / static_cast<double>(labels_prior.labels.size());
        write_json(file, {{"key", key},
                          {"labeling", cfg.labeling.to_json()},
                          {"positive_rate", labels_prior.positive_rate},
                          {"label_values", labels_prior.labels}});
      } catch (const std::exception& e) {
        throw std::runtime_error("stage labels image_prior: " + std::string(e.what()));
      }
    }
    log_stage("labels image_prior", "positive rate " + format_double(labels_prior.positive_rate),
              clock.seconds(), cached);
  }

  // ---- denoiser ----
  TrainConfig dtrain = cfg.denoiser_train;
  dtrain.seed = derive_seed(cfg.master_seed, "denoiser_train");
  const std::string denoiser_key =
      stage_key(corpus_key + "|" + cfg.schedule.to_json().dump() + "|" + dtrain.to_json().dump());
  const fs::path denoiser_dir = out / "denoiser";
  Denoiser denoiser = Denoiser::init(Rng::seeded(derive_seed(cfg.master_seed, "denoiser_init")));
  {
    StageClock clock;
    bool cached = stage_valid(denoiser_dir, denoiser_key);
    try {
      if (cached) {
        denoiser = Denoiser::load(denoiser_dir / "checkpoint");
        result.denoiser_heldout =
            read_json(denoiser_dir / "result.json").at("final_heldout").get<double>();
      } else {
        DenoiseDataset data{corpus_images, corpus_cond};
        TrainResult tr =
            train_denoiser(denoiser, data, cfg.schedule, dtrain, denoiser_dir / "train_log.csv");
        result.denoiser_heldout = tr.final_heldout;
        denoiser.save(denoiser_dir / "checkpoint");
        write_json(denoiser_dir / "result.json", {{"initial_heldout", tr.initial_heldout},
                                                  {"final_heldout", tr.final_heldout},
                                                  {"steps_run", tr.steps_run}});
        mark_stage(denoiser_dir, denoiser_key);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage denoiser: " + std::string(e.what()));
    }
    log_stage("denoiser", "held-out loss " + format_double(result.denoiser_heldout),
              clock.seconds(), cached);
  }

  // ---- classifiers ----
  auto train_head = [&](const std::string& name, const LabelSet& labels,
                        double* acc_out) -> GuidanceClassifier {
    const std::string key = stage_key(denoiser_key + "|" + labels.key + "|" +
                                      cfg.classifier_train.to_json().dump() + "|" + name);
    const fs::path dir = out / ("classifier_" + name);
    StageClock clock;
    bool cached = stage_valid(dir, key);
    try {
      if (cached) {
        GuidanceClassifier clf = GuidanceClassifier::load(dir / "checkpoint", &denoiser);
        double acc = read_json(dir / "result.json").at("heldout_accuracy").get<double>();
        if (acc_out) *acc_out = acc;
        log_stage("classifier " + name, "held-out accuracy " + format_double(acc),
                  clock.seconds(), true);
        return clf;
      }
      TrainConfig ctrain = cfg.classifier_train;
      ctrain.seed = derive_seed(cfg.master_seed, "classifier_train_" + name);
      GuidanceClassifier clf(&denoiser,
                             Rng::seeded(derive_seed(cfg.master_seed, "classifier_init_" + name)));
      LabeledDataset data{corpus_images, labels.labels};
      TrainResult tr = train_classifier(clf, data, cfg.schedule, ctrain, dir / "train_log.csv");
      clf.save(dir / "checkpoint");
      write_json(dir / "result.json", {{"initial_heldout", tr.initial_heldout},
                                       {"final_heldout", tr.final_heldout},
                                       {"heldout_accuracy", tr.final_heldout_accuracy},
                                       {"steps_run", tr.steps_run}});
      mark_stage(dir, key);
      if (acc_out) *acc_out = tr.final_heldout_accuracy;
      log_stage("classifier " + name,
                "held-out accuracy " + format_double(tr.final_heldout_accuracy), clock.seconds(),
                false);
      return clf;
    } catch (const std::exception& e) {
      throw std::runtime_error("stage classifier " + name + ": " + std::string(e.what()));
    }
  };

  GuidanceClassifier clf_judge_A = train_head("judge_A", labels_A, &result.classifier_acc);
  GuidanceClassifier clf_prior = train_head("image_prior", labels_prior, nullptr);

  std::optional<GuidanceClassifier> clf_judge_B;
  if (cfg.run_transfer) {
    LabelSet labels_B = judge_labels(DynamicsVariant::B);
    clf_judge_B.emplace(train_head("judge_B", labels_B, nullptr));
  }

  // ---- sampling ----
  const std::uint64_t prompt_seed = derive_seed(cfg.master_seed, "gen_prompts");
  const Tensor gen_cond = sample_prompt_rows(cfg.sample_count, prompt_seed);
  const std::uint64_t sampling_seed = derive_seed(cfg.master_seed, "sampling");

  struct Job {
    std::string condition;
    double lambda;
    const GuidanceClassifier* clf;
    std::string clf_tag;
    Tensor images;
  };
  std::vector<Job> jobs;
  jobs.push_back({"baseline", 0.0, nullptr, "none", Tensor()});
  for (double l : cfg.lambdas) {
    if (l <= 0.0) continue;
    jobs.push_back({"image_prior", l, &clf_prior, "image_prior", Tensor()});
    jobs.push_back({"video_judge", l, &clf_judge_A, "judge_A", Tensor()});
  }
  if (cfg.run_transfer) {
    bool have_judge_A_at_transfer =
        std::any_of(jobs.begin(), jobs.end(), [&](const Job& j) {
          return j.condition == "video_judge" && j.lambda == cfg.transfer_lambda;
        });
    if (!have_judge_A_at_transfer)
      jobs.push_back({"video_judge", cfg.transfer_lambda, &clf_judge_A, "judge_A", Tensor()});
    jobs.push_back({"judge_B", cfg.transfer_lambda, &*clf_judge_B, "judge_B", Tensor()});
  }

  for (Job& job : jobs) {
    GuidanceConfig gcfg;
    gcfg.lambda = job.lambda;
    gcfg.sampler = cfg.sampler;
    gcfg.steps = cfg.sample_steps;
    gcfg.eta = cfg.sample_eta;
    gcfg.seed = sampling_seed;
    const std::string key =
        stage_key(denoiser_key + "|" + job.clf_tag + "|" + gcfg.to_json().dump() + "|" +
                  std::to_string(cfg.sample_count) + "|" + std::to_string(prompt_seed));
    const fs::path dir =
        out / "samples" / (job.condition + "_lambda_" + lambda_tag(job.lambda));
    const std::string label = job.condition + " lambda=" + lambda_tag(job.lambda);
    StageClock clock;
    bool cached = stage_valid(dir, key) && fs::exists(dir / "images.bin");
    try {
      if (cached) {
        job.images = read_tensor(dir / "images.bin");
      } else {
        job.images =
            sample_images(denoiser, job.clf, gen_cond, gcfg, cfg.schedule, cfg.workers);
        fs::create_directories(dir);
        write_tensor(dir / "images.bin", job.images);
        write_json(dir / "manifest.json", {{"condition", job.condition},
                                           {"lambda", job.lambda},
                                           {"classifier", job.clf_tag},
                                           {"count", cfg.sample_count},
                                           {"sampling", gcfg.to_json()}});
        mark_stage(dir, key);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage samples " + label + ": " + std::string(e.what()));
    }
    log_stage("samples", label, clock.seconds(), cached);
  }

  // ---- evaluation ----
  const std::uint64_t eval_flow_seed = derive_seed(cfg.master_seed, "eval_flow");
  const std::uint64_t eval_label_seed = derive_seed(cfg.master_seed, "eval_labels");
  auto score = [&](const Tensor& images_t) -> SampleMetrics {
    std::vector<Frame> frames = tensor_to_frames(images_t);
    SampleMetrics m;
    std::vector<FlowStats> stats = video_flow_stats(frames, cfg.dynamics, cfg.eval_variant,
                                                    cfg.labeling.flow, eval_flow_seed,
                                                    cfg.workers);
    m.dyn_degree = dynamic_degree(stats, cfg.motion_threshold);
    LogitSummary ls = logit_summary(clf_judge_A, frames);
    m.mean_logit = ls.mean;
    m.logit_se = ls.se;
    std::vector<LabeledPair> pairs = label_corpus(frames, cfg.dynamics, cfg.eval_variant,
                                                  cfg.labeling, eval_label_seed, cfg.workers);
    long positives = 0;
    for (const LabeledPair& p : pairs) positives += p.label;
    m.positive_rate = static_cast<double>(positives) / static_cast<double>(pairs.size());
    return m;
  };

  StageClock eval_clock;
  std::map<std::pair<std::string, double>, SampleMetrics> metrics;
  try {
    for (const Job& job : jobs)
      metrics[{job.condition, job.lambda}] = score(job.images);
  } catch (const std::exception& e) {
    throw std::runtime_error("stage eval: " + std::string(e.what()));
  }

  const SampleMetrics& base = metrics.at({"baseline", 0.0});
  auto push_row = [&](const std::string& condition, double lambda, const SampleMetrics& m) {
    result.rows.push_back(
        {condition, lambda, m.dyn_degree, m.mean_logit, m.logit_se, m.positive_rate,
         cfg.sample_count});
  };
  push_row("baseline", 0.0, base);
  for (const std::string& condition : {std::string("image_prior"), std::string("video_judge")})
    for (double l : cfg.lambdas) {
      // lambda = 0 guidance is bit-identical to the baseline, so reuse it
      auto it = metrics.find({condition, l});
      push_row(condition, l, l == 0.0 ? base : it->second);
    }

  // ---- transfer ----
  if (cfg.run_transfer) {
    try {
      auto find_images = [&](const std::string& condition, double lambda) -> const Tensor& {
        for (const Job& j : jobs)
          if (j.condition == condition && j.lambda == lambda) return j.images;
        throw std::logic_error("transfer: missing sample set " + condition);
      };
      struct Source {
        std::string classifier;
        double lambda;
        const Tensor* images;
      };
      std::vector<Source> sources = {
          {"none", 0.0, &find_images("baseline", 0.0)},
          {"judge_A", cfg.transfer_lambda, &find_images("video_judge", cfg.transfer_lambda)},
          {"judge_B", cfg.transfer_lambda, &find_images("judge_B", cfg.transfer_lambda)}};
      for (const Source& src : sources) {
        std::vector<Frame> frames = tensor_to_frames(*src.images);
        for (DynamicsVariant variant : {DynamicsVariant::A, DynamicsVariant::B}) {
          std::uint64_t seed = derive_seed(cfg.master_seed,
                                           std::string("transfer_eval_") + variant_name(variant));
          std::vector<FlowStats> stats = video_flow_stats(
              frames, cfg.dynamics, variant, cfg.labeling.flow, seed, cfg.workers);
          result.transfer.push_back({src.classifier, variant_name(variant), src.lambda,
                                     dynamic_degree(stats, cfg.motion_threshold),
                                     cfg.sample_count});
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage transfer: " + std::string(e.what()));
    }
  }
  log_stage("eval", std::to_string(result.rows.size()) + " rows", eval_clock.seconds(), false);

  try {
    emit_report(cfg, result);
  } catch (const std::exception& e) {
    throw std::runtime_error("stage report: " + std::string(e.what()));
  }
  return result;
}

namespace {

std::string render_csv(const PipelineResult& result) {
  std::ostringstream os;
  os << "condition,lambda,dynamic_degree,mean_logit,logit_se,positive_rate,samples\n";
  for (const ReportRow& r : result.rows)
    os << r.condition << "," << format_double(r.lambda) << "," << format_double(r.dyn_degree)
       << "," << format_double(r.mean_logit) << "," << format_double(r.logit_se) << ","
       << format_double(r.positive_rate) << "," << r.samples << "\n";
  return os.str();
}

std::string render_transfer_csv(const PipelineResult& result) {
  std::ostringstream os;
  os << "classifier,dynamics,lambda,dynamic_degree,samples\n";
  for (const TransferRow& r : result.transfer)
    os << r.classifier << "," << r.dynamics << "," << format_double(r.lambda) << ","
       << format_double(r.dyn_degree) << "," << r.samples << "\n";
  return os.str();
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string render_md(const ExperimentConfig& cfg, const PipelineResult& result) {
  std::ostringstream os;
  os << "# Guided sampling sweep\n\n";
  os << "- corpus label positive rate (judge, variant A): "
     << fixed3(result.corpus_label_rate) << "\n";
  os << "- classifier held-out accuracy (t <= T/4): " << fixed3(result.classifier_acc) << "\n";
  os << "- denoiser held-out loss: " << fixed3(result.denoiser_heldout) << "\n";
  os << "- dynamic degree threshold: " << format_double(cfg.motion_threshold)
     << " px/frame, variant " << variant_name(cfg.eval_variant) << "\n\n";
  os << "| condition | lambda | dynamic degree | mean logit | positive rate |\n";
  os << "|---|---|---|---|---|\n";
  for (const ReportRow& r : result.rows)
    os << "| " << r.condition << " | " << format_double(r.lambda) << " | "
       << fixed3(r.dyn_degree) << " | " << fixed3(r.mean_logit) << " | "
       << fixed3(r.positive_rate) << " |\n";
  if (!result.transfer.empty()) {
    os << "\n## Transfer across downstream variants\n\n";
    os << "| classifier | dynamics | lambda | dynamic degree |\n";
    os << "|---|---|---|---|\n";
    for (const TransferRow& r : result.transfer)
      os << "| " << r.classifier << " | " << r.dynamics << " | " << format_double(r.lambda)
         << " | " << fixed3(r.dyn_degree) << " |\n";
  }
  return os.str();
}

std::string render_svg(const ExperimentConfig& cfg, const PipelineResult& result) {
  const double w = 480, h = 320, ml = 52, mr = 16, mt = 20, mb = 40;
  const double pw = w - ml - mr, ph = h - mt - mb;
  double lmax = 1.0;
  for (double l : cfg.lambdas) lmax = std::max(lmax, l);
  auto X = [&](double l) { return ml + pw * (l / lmax); };
  auto Y = [&](double d) { return mt + ph * (1.0 - d); };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  // axes and gridlines
  for (int i = 0; i <= 4; ++i) {
    double d = 0.25 * i;
    os << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(Y(d)) << "\" x2=\"" << fmt(ml + pw)
       << "\" y2=\"" << fmt(Y(d)) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(Y(d) + 4)
       << "\" text-anchor=\"end\">" << fmt(d) << "</text>\n";
  }
  for (double l : cfg.lambdas) {
    os << "<line x1=\"" << fmt(X(l)) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(X(l))
       << "\" y2=\"" << fmt(mt + ph + 4) << "\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << fmt(X(l)) << "\" y=\"" << fmt(mt + ph + 16)
       << "\" text-anchor=\"middle\">" << lambda_tag(l) << "</text>\n";
  }
  os << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(h - 8)
     << "\" text-anchor=\"middle\">guidance strength</text>\n";
  os << "<text x=\"14\" y=\"" << fmt(mt + ph / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << fmt(mt + ph / 2)
     << ")\">dynamic degree</text>\n";
  const struct {
    const char* condition;
    const char* color;
  } series[] = {{"image_prior", "#d62728"}, {"video_judge", "#1f77b4"}};
  double baseline = 0.0;
  for (const ReportRow& r : result.rows)
    if (r.condition == "baseline") baseline = r.dyn_degree;
  os << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(Y(baseline)) << "\" x2=\"" << fmt(ml + pw)
     << "\" y2=\"" << fmt(Y(baseline))
     << "\" stroke=\"#888\" stroke-dasharray=\"5,4\"/>\n";
  os << "<text x=\"" << fmt(ml + 4) << "\" y=\"" << fmt(Y(baseline) - 4)
     << "\" fill=\"#888\">baseline</text>\n";
  for (const auto& s : series) {
    std::ostringstream pts;
    for (const ReportRow& r : result.rows)
      if (r.condition == s.condition)
        pts << fmt(X(r.lambda)) << "," << fmt(Y(r.dyn_degree)) << " ";
    os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"2\"/>\n";
    for (const ReportRow& r : result.rows)
      if (r.condition == s.condition)
        os << "<circle cx=\"" << fmt(X(r.lambda)) << "\" cy=\"" << fmt(Y(r.dyn_degree))
           << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
  }
  os << "<text x=\"" << fmt(ml + pw - 4) << "\" y=\"" << fmt(mt + 12)
     << "\" text-anchor=\"end\" fill=\"#d62728\">image_prior</text>\n";
  os << "<text x=\"" << fmt(ml + pw - 4) << "\" y=\"" << fmt(mt + 26)
     << "\" text-anchor=\"end\" fill=\"#1f77b4\">video_judge</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace

void emit_report(const ExperimentConfig& cfg, const PipelineResult& result) {
  const fs::path dir = cfg.out_dir / "eval";
  fs::create_directories(dir);
  write_text(dir / "results.csv", render_csv(result));
  write_text(dir / "transfer.csv", render_transfer_csv(result));
  write_text(dir / "results.md", render_md(cfg, result));
  write_text(dir / "sweep.svg", render_svg(cfg, result));
  write_json(dir / "report.json",
             {{"config", cfg.to_json()}, {"result", result.to_json()}});

  // content manifest over the run's durable artifacts, sorted for stability
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.out_dir)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), cfg.out_dir);
    if (rel == "eval/manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json manifest = nlohmann::json::object();
  for (const fs::path& rel : files) {
    std::string bytes = read_text(cfg.out_dir / rel);
    manifest[rel.generic_string()] = {{"bytes", bytes.size()},
                                      {"hash", hash_hex(bytes)}};
  }
  write_json(dir / "manifest.json", manifest);
}

PipelineResult load_result(const fs::path& out_dir) {
  nlohmann::json j = read_json(out_dir / "eval" / "report.json");
  return PipelineResult::from_json(j.at("result"));
}

}  // namespace mg
