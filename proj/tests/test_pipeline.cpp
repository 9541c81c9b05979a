#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "motionguide/pipeline.hpp"
#include "motionguide/serialize.hpp"

using namespace mg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / "mg_pipeline_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineResult toy_result() {
  PipelineResult r;
  r.rows.push_back({"baseline", 0.0, 0.21, -0.4, 0.05, 0.25, 64});
  r.rows.push_back({"image_prior", 2.0, 0.28, 0.1, 0.06, 0.31, 64});
  r.rows.push_back({"video_judge", 2.0, 0.44, 0.9, 0.07, 0.5, 64});
  r.transfer.push_back({"none", "A", 0.0, 0.21, 64});
  r.transfer.push_back({"judge_A", "B", 4.0, 0.39, 64});
  r.corpus_label_rate = 0.54;
  r.classifier_acc = 0.83;
  r.denoiser_heldout = 0.19;
  return r;
}

}  // namespace

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.validate();

  ExperimentConfig bad = cfg;
  bad.workers = 0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.sample_count = 0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.lambdas = {};
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.lambdas = {0.0, 2.0, 1.0};  // must increase strictly
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.lambdas = {-1.0, 0.0};
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.transfer_lambda = 0.0;
  CHECK_THROWS(bad.validate());
  bad.run_transfer = false;  // unused lambda is no longer checked
  bad.validate();
  bad = cfg;
  bad.motion_threshold = -0.1;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.sample_steps = cfg.schedule.T();  // guidance path needs steps < T
  CHECK_THROWS(bad.validate());
}

TEST_CASE("experiment config json round trip") {
  ExperimentConfig cfg;
  cfg.out_dir = "elsewhere";
  cfg.master_seed = 99;
  cfg.workers = 4;
  cfg.corpus.prompts = 32;
  cfg.corpus.images_per_prompt = 4;
  cfg.sampler = SamplerKind::ddpm;
  cfg.sample_steps = 25;
  cfg.sample_eta = 0.5;
  cfg.sample_count = 128;
  cfg.lambdas = {0.0, 1.5, 3.0};
  cfg.eval_variant = DynamicsVariant::B;
  cfg.motion_threshold = 0.4;
  cfg.run_transfer = false;
  cfg.denoiser_train.steps = 17;
  cfg.classifier_train.lr = 2e-3;

  ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json().dump() == cfg.to_json().dump());
  CHECK(back.sampler == SamplerKind::ddpm);
  CHECK(back.eval_variant == DynamicsVariant::B);
  CHECK(back.denoiser_train.steps == 17);

  nlohmann::json j = cfg.to_json();
  j["sampling"]["sampler"] = "euler";
  CHECK_THROWS(ExperimentConfig::from_json(j));

  // defaults fill anything the json leaves out
  ExperimentConfig sparse = ExperimentConfig::from_json({{"master_seed", 5}});
  CHECK(sparse.master_seed == 5);
  CHECK(sparse.corpus.prompts == ExperimentConfig{}.corpus.prompts);
}

TEST_CASE("report row and result json round trips") {
  PipelineResult r = toy_result();
  for (const ReportRow& row : r.rows) {
    ReportRow back = ReportRow::from_json(row.to_json());
    CHECK(back.to_json().dump() == row.to_json().dump());
  }
  for (const TransferRow& row : r.transfer) {
    TransferRow back = TransferRow::from_json(row.to_json());
    CHECK(back.to_json().dump() == row.to_json().dump());
  }
  PipelineResult back = PipelineResult::from_json(r.to_json());
  CHECK(back.to_json().dump() == r.to_json().dump());
  CHECK(back.rows.size() == 3);
  CHECK(back.rows[2].condition == "video_judge");
  CHECK(back.classifier_acc == 0.83);
}

TEST_CASE("emit_report writes the artifact set") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("report");
  PipelineResult r = toy_result();
  emit_report(cfg, r);

  const fs::path eval = cfg.out_dir / "eval";
  for (const char* name :
       {"results.csv", "transfer.csv", "results.md", "sweep.svg", "report.json",
        "manifest.json"})
    CHECK(fs::exists(eval / name));

  std::string csv = read_text(eval / "results.csv");
  CHECK(csv.rfind("condition,lambda,dynamic_degree,mean_logit,logit_se,positive_rate,samples\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(csv.find("video_judge,2,") != std::string::npos);

  std::string md = read_text(eval / "results.md");
  CHECK(md.find("| baseline |") != std::string::npos);
  CHECK(md.find("| judge_A | B |") != std::string::npos);
  CHECK(read_text(eval / "sweep.svg").rfind("<svg", 0) == 0);

  PipelineResult loaded = load_result(cfg.out_dir);
  CHECK(loaded.to_json().dump() == r.to_json().dump());
}

TEST_CASE("manifest covers the run and stays sorted") {
  ExperimentConfig cfg;
  cfg.out_dir = temp_dir("manifest");
  write_text(cfg.out_dir / "extra.txt", "artifact body");
  emit_report(cfg, toy_result());

  nlohmann::json manifest = read_json(cfg.out_dir / "eval" / "manifest.json");
  CHECK(manifest.contains("extra.txt"));
  CHECK(manifest.contains("eval/results.csv"));
  CHECK_FALSE(manifest.contains("eval/manifest.json"));  // never hashes itself

  std::vector<std::string> keys;
  for (auto it = manifest.begin(); it != manifest.end(); ++it) keys.push_back(it.key());
  std::vector<std::string> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  CHECK(keys == sorted);

  std::string body = read_text(cfg.out_dir / "extra.txt");
  CHECK(manifest.at("extra.txt").at("bytes").get<std::size_t>() == body.size());
  CHECK(manifest.at("extra.txt").at("hash").get<std::string>() == hash_hex(body));
}

TEST_CASE("sample_images validates and ignores worker count") {
  Denoiser model = Denoiser::init(Rng::seeded(61));
  NoiseSchedule sched = NoiseSchedule::defaults();
  GuidanceConfig gcfg;
  gcfg.lambda = 0.0;
  gcfg.steps = 3;
  gcfg.seed = 9;

  CHECK_THROWS(sample_images(model, nullptr, Tensor::zeros({2, 8}), gcfg, sched));
  GuidanceConfig guided = gcfg;
  guided.lambda = 1.0;
  CHECK_THROWS(sample_images(model, nullptr, Tensor::zeros({2, 16}), guided, sched));

  // 66 rows span two chunks; per-sample streams are keyed globally, so the
  // worker count cannot change a byte
  Rng crng = Rng::seeded(62);
  Tensor cond = Tensor::randn({66, 16}, crng);
  Tensor w1 = sample_images(model, nullptr, cond, gcfg, sched, 1);
  Tensor w2 = sample_images(model, nullptr, cond, gcfg, sched, 2);
  CHECK(w1.shape() == Shape{66, 1, 32, 32});
  CHECK((w1.array() - w2.array()).abs().maxCoeff() == 0.0);
  CHECK(w1.array().minCoeff() >= 0.0);
  CHECK(w1.array().maxCoeff() <= 1.0);
}
