// Command-line front end: every subcommand is a thin wrapper over the library.
// Config files are JSON; sections absent from the file fall back to defaults.

#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "motionguide/pipeline.hpp"
#include "motionguide/serialize.hpp"

namespace {

using namespace mg;

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  return read_json(path);
}

DynamicsParams dynamics_from(const nlohmann::json& j) {
  return j.contains("dynamics") ? DynamicsParams::from_json(j.at("dynamics")) : DynamicsParams{};
}

LabelingParams labeling_from(const nlohmann::json& j) {
  return j.contains("labeling") ? LabelingParams::from_json(j.at("labeling")) : LabelingParams{};
}

NoiseSchedule schedule_from(const nlohmann::json& j) {
  return j.contains("schedule") ? NoiseSchedule::from_json(j.at("schedule"))
                                : NoiseSchedule::defaults();
}

std::vector<int> labels_from_file(const std::string& path, long expected) {
  nlohmann::json j = read_json(path);
  std::vector<int> labels = j.at("label_values").get<std::vector<int>>();
  if (static_cast<long>(labels.size()) != expected)
    throw std::runtime_error("label file " + path + " has " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(expected) + " corpus items");
  return labels;
}

nlohmann::json label_pairs_json(const std::vector<LabeledPair>& pairs) {
  nlohmann::json values = nlohmann::json::array();
  nlohmann::json items = nlohmann::json::array();
  long positives = 0;
  std::map<std::string, long> stages;
  for (const LabeledPair& p : pairs) {
    values.push_back(p.label);
    positives += p.label;
    stages[stage_name(p.stage)] += 1;
    items.push_back(p.to_json());
  }
  return {{"positive_rate", static_cast<double>(positives) / static_cast<double>(pairs.size())},
          {"stage_counts", stages},
          {"label_values", std::move(values)},
          {"items", std::move(items)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"classifier-guided diffusion for downstream video dynamics"};
  app.require_subcommand(1);
  std::function<int()> action;

  // ---- gen-corpus ----
  {
    auto* cmd = app.add_subcommand("gen-corpus", "render a labeled-intent image corpus");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("corpus");
    cmd->add_option("--config", *config, "experiment JSON; uses its corpus section");
    cmd->add_option("--out", *out, "output directory");
    cmd->callback([&action, config, out] {
      action = [config, out]() {
        nlohmann::json j = load_config(*config);
        CorpusConfig cfg = j.contains("corpus") ? CorpusConfig::from_json(j.at("corpus"))
                                                : CorpusConfig{};
        Corpus corpus = generate_corpus(cfg);
        save_corpus(*out, corpus);
        std::cout << "corpus: " << corpus.size() << " items over " << corpus.prompts.size()
                  << " prompts (" << corpus.prompt_draws << " draws, " << corpus.dups_rejected
                  << " duplicates removed) -> " << *out << "\n";
        return 0;
      };
    });
  }

  // ---- label ----
  {
    auto* cmd = app.add_subcommand("label", "run the two-stage video judge over a corpus");
    auto corpus_dir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("labels.json");
    auto config = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>("A");
    auto mode = std::make_shared<std::string>("video");
    auto seed = std::make_shared<std::uint64_t>(0);
    auto workers = std::make_shared<int>(1);
    cmd->add_option("--corpus", *corpus_dir, "corpus directory")->required();
    cmd->add_option("--out", *out, "output JSON file");
    cmd->add_option("--config", *config, "JSON with dynamics/labeling sections");
    cmd->add_option("--variant", *variant, "downstream dynamics variant (A or B)");
    cmd->add_option("--mode", *mode, "video (full judge) or image (static priors)")
        ->check(CLI::IsMember({"video", "image"}));
    cmd->add_option("--seed", *seed, "dynamics seed");
    cmd->add_option("--workers", *workers, "worker threads");
    cmd->callback([&action, corpus_dir, out, config, variant, mode, seed, workers] {
      action = [corpus_dir, out, config, variant, mode, seed, workers]() {
        nlohmann::json j = load_config(*config);
        Corpus corpus = load_corpus(*corpus_dir);
        LabelingParams lp = labeling_from(j);
        nlohmann::json report;
        if (*mode == "video") {
          std::vector<LabeledPair> pairs =
              label_corpus(corpus.images, dynamics_from(j), variant_from_name(*variant), lp,
                           *seed, *workers);
          report = label_pairs_json(pairs);
          report["variant"] = *variant;
        } else {
          std::vector<int> labels = label_image_priors(corpus.images, lp);
          long positives = 0;
          for (int v : labels) positives += v;
          report = {{"positive_rate",
                     static_cast<double>(positives) / static_cast<double>(labels.size())},
                    {"label_values", labels}};
        }
        report["mode"] = *mode;
        write_json(*out, report);
        std::cout << "labels: positive rate " << format_double(report["positive_rate"].get<double>())
                  << " -> " << *out << "\n";
        return 0;
      };
    });
  }

  // ---- train-denoiser ----
  {
    auto* cmd = app.add_subcommand("train-denoiser", "fit the conditional noise predictor");
    auto corpus_dir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("denoiser");
    auto config = std::make_shared<std::string>();
    auto init_seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--corpus", *corpus_dir, "corpus directory")->required();
    cmd->add_option("--out", *out, "output directory");
    cmd->add_option("--config", *config, "JSON with schedule/denoiser_train sections");
    cmd->add_option("--init-seed", *init_seed, "weight initialization seed");
    cmd->callback([&action, corpus_dir, out, config, init_seed] {
      action = [corpus_dir, out, config, init_seed]() {
        nlohmann::json j = load_config(*config);
        Corpus corpus = load_corpus(*corpus_dir);
        NoiseSchedule sched = schedule_from(j);
        TrainConfig tcfg = TrainConfig::from_json(j.value("denoiser_train", nlohmann::json::object()),
                                                  TrainConfig::denoiser_defaults());
        Denoiser model = Denoiser::init(Rng::seeded(*init_seed));
        DenoiseDataset data{corpus.images_tensor(), corpus.cond_tensor()};
        std::filesystem::path dir = *out;
        TrainResult tr = train_denoiser(model, data, sched, tcfg, dir / "train_log.csv");
        model.save(dir / "checkpoint", {{"schedule", sched.to_json()}});
        write_json(dir / "result.json", {{"initial_heldout", tr.initial_heldout},
                                         {"final_heldout", tr.final_heldout},
                                         {"steps_run", tr.steps_run}});
        std::cout << "denoiser: held-out loss " << format_double(tr.final_heldout) << " after "
                  << tr.steps_run << " steps -> " << *out << "\n";
        return 0;
      };
    });
  }

  // ---- train-classifier ----
  {
    auto* cmd = app.add_subcommand("train-classifier",
                                   "fit the judgment head on a frozen denoiser encoder");
    auto denoiser_dir = std::make_shared<std::string>();
    auto corpus_dir = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("classifier");
    auto config = std::make_shared<std::string>();
    auto init_seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--denoiser", *denoiser_dir, "denoiser checkpoint directory")->required();
    cmd->add_option("--corpus", *corpus_dir, "corpus directory")->required();
    cmd->add_option("--labels", *labels, "label JSON from `label`")->required();
    cmd->add_option("--out", *out, "output directory");
    cmd->add_option("--config", *config, "JSON with schedule/classifier_train sections");
    cmd->add_option("--init-seed", *init_seed, "head initialization seed");
    cmd->callback([&action, denoiser_dir, corpus_dir, labels, out, config, init_seed] {
      action = [denoiser_dir, corpus_dir, labels, out, config, init_seed]() {
        nlohmann::json j = load_config(*config);
        Denoiser model = Denoiser::load(*denoiser_dir);
        Corpus corpus = load_corpus(*corpus_dir);
        NoiseSchedule sched = schedule_from(j);
        TrainConfig tcfg = TrainConfig::from_json(
            j.value("classifier_train", nlohmann::json::object()),
            TrainConfig::classifier_defaults());
        GuidanceClassifier clf(&model, Rng::seeded(*init_seed));
        LabeledDataset data{corpus.images_tensor(),
                            labels_from_file(*labels, corpus.size())};
        std::filesystem::path dir = *out;
        TrainResult tr = train_classifier(clf, data, sched, tcfg, dir / "train_log.csv");
        clf.save(dir / "checkpoint");
        write_json(dir / "result.json", {{"initial_heldout", tr.initial_heldout},
                                         {"final_heldout", tr.final_heldout},
                                         {"heldout_accuracy", tr.final_heldout_accuracy},
                                         {"steps_run", tr.steps_run}});
        std::cout << "classifier: held-out accuracy "
                  << format_double(tr.final_heldout_accuracy) << " -> " << *out << "\n";
        return 0;
      };
    });
  }

  // ---- sample ----
  {
    auto* cmd = app.add_subcommand("sample", "draw images, optionally classifier-guided");
    auto denoiser_dir = std::make_shared<std::string>();
    auto classifier_dir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("samples");
    auto config = std::make_shared<std::string>();
    auto count = std::make_shared<long>(64);
    auto prompt_seed = std::make_shared<std::uint64_t>(0);
    auto workers = std::make_shared<int>(1);
    cmd->add_option("--denoiser", *denoiser_dir, "denoiser checkpoint directory")->required();
    cmd->add_option("--classifier", *classifier_dir, "classifier checkpoint directory");
    cmd->add_option("--out", *out, "output directory");
    cmd->add_option("--config", *config, "JSON with schedule/sampling sections");
    cmd->add_option("--count", *count, "number of images");
    cmd->add_option("--prompt-seed", *prompt_seed, "conditioning draw seed");
    cmd->add_option("--workers", *workers, "worker threads");
    cmd->callback([&action, denoiser_dir, classifier_dir, out, config, count, prompt_seed,
                   workers] {
      action = [denoiser_dir, classifier_dir, out, config, count, prompt_seed, workers]() {
        nlohmann::json j = load_config(*config);
        Denoiser model = Denoiser::load(*denoiser_dir);
        NoiseSchedule sched = schedule_from(j);
        GuidanceConfig gcfg = GuidanceConfig::from_json(
            j.value("sampling", nlohmann::json::object()));
        gcfg.validate(sched.T());
        std::optional<GuidanceClassifier> clf;
        if (!classifier_dir->empty())
          clf.emplace(GuidanceClassifier::load(*classifier_dir, &model));
        if (gcfg.lambda > 0.0 && !clf)
          throw std::runtime_error("sample: lambda > 0 requires --classifier");
        Tensor cond = sample_prompt_rows(*count, *prompt_seed);
        Tensor images =
            sample_images(model, clf ? &*clf : nullptr, cond, gcfg, sched, *workers);
        std::filesystem::path dir = *out;
        std::filesystem::create_directories(dir);
        write_tensor(dir / "images.bin", images);
        write_json(dir / "manifest.json", {{"count", *count},
                                           {"prompt_seed", *prompt_seed},
                                           {"sampling", gcfg.to_json()},
                                           {"images_hash", tensor_hash(images)}});
        std::cout << "samples: " << *count << " images (lambda=" << gcfg.lambda << ") -> "
                  << *out << "\n";
        return 0;
      };
    });
  }

  // ---- eval ----
  {
    auto* cmd = app.add_subcommand("eval", "dynamic degree of an image batch");
    auto samples = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto config = std::make_shared<std::string>();
    auto variant = std::make_shared<std::string>("A");
    auto threshold = std::make_shared<double>(0.25);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto workers = std::make_shared<int>(1);
    cmd->add_option("--samples", *samples, "images.bin path")->required();
    cmd->add_option("--out", *out, "optional JSON output path");
    cmd->add_option("--config", *config, "JSON with dynamics/labeling sections");
    cmd->add_option("--variant", *variant, "downstream dynamics variant");
    cmd->add_option("--threshold", *threshold, "dynamic-degree flow threshold, px/frame");
    cmd->add_option("--seed", *seed, "dynamics seed");
    cmd->add_option("--workers", *workers, "worker threads");
    cmd->callback([&action, samples, out, config, variant, threshold, seed, workers] {
      action = [samples, out, config, variant, threshold, seed, workers]() {
        nlohmann::json j = load_config(*config);
        Tensor t = read_tensor(*samples);
        const long per = Frame::kSize * Frame::kSize;
        std::vector<Frame> frames;
        for (long i = 0; i < t.size() / per; ++i) frames.push_back(tensor_row_to_frame(t, i));
        LabelingParams lp = labeling_from(j);
        std::vector<FlowStats> stats =
            video_flow_stats(frames, dynamics_from(j), variant_from_name(*variant), lp.flow,
                             *seed, *workers);
        double dd = dynamic_degree(stats, *threshold);
        std::cout << "dynamic degree: " << format_double(dd) << " over " << frames.size()
                  << " videos (threshold " << *threshold << ", variant " << *variant << ")\n";
        if (!out->empty())
          write_json(*out, {{"dynamic_degree", dd},
                            {"videos", frames.size()},
                            {"threshold", *threshold},
                            {"variant", *variant}});
        return 0;
      };
    });
  }

  // ---- sweep / transfer / report ----
  {
    auto* cmd = app.add_subcommand("sweep", "full pipeline with a guidance-strength sweep");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto workers = std::make_shared<int>(0);
    cmd->add_option("--config", *config, "experiment JSON")->required();
    cmd->add_option("--out", *out, "override out_dir");
    cmd->add_option("--workers", *workers, "override worker threads");
    cmd->callback([&action, config, out, workers] {
      action = [config, out, workers]() {
        ExperimentConfig ec = ExperimentConfig::from_json(read_json(*config));
        if (!out->empty()) ec.out_dir = *out;
        if (*workers > 0) ec.workers = *workers;
        PipelineResult r = run_pipeline(ec);
        for (const ReportRow& row : r.rows)
          std::cout << row.condition << " lambda=" << row.lambda << " dynamic_degree="
                    << format_double(row.dyn_degree) << "\n";
        std::cout << "report: " << (ec.out_dir / "eval" / "results.csv").string() << "\n";
        return 0;
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("transfer",
                                   "cross-variant study (reuses finished pipeline stages)");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--config", *config, "experiment JSON")->required();
    cmd->add_option("--out", *out, "override out_dir");
    cmd->callback([&action, config, out] {
      action = [config, out]() {
        ExperimentConfig ec = ExperimentConfig::from_json(read_json(*config));
        if (!out->empty()) ec.out_dir = *out;
        ec.run_transfer = true;
        PipelineResult r = run_pipeline(ec);
        for (const TransferRow& row : r.transfer)
          std::cout << "classifier=" << row.classifier << " dynamics=" << row.dynamics
                    << " lambda=" << row.lambda << " dynamic_degree="
                    << format_double(row.dyn_degree) << "\n";
        return 0;
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("report", "re-emit report files from a finished run");
    auto run_dir = std::make_shared<std::string>();
    cmd->add_option("--run", *run_dir, "pipeline out_dir")->required();
    cmd->callback([&action, run_dir] {
      action = [run_dir]() {
        std::filesystem::path dir = *run_dir;
        nlohmann::json j = read_json(dir / "eval" / "report.json");
        ExperimentConfig ec = ExperimentConfig::from_json(j.at("config"));
        ec.out_dir = dir;
        PipelineResult r = PipelineResult::from_json(j.at("result"));
        emit_report(ec, r);
        std::cout << "report: refreshed " << (dir / "eval").string() << "\n";
        return 0;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
