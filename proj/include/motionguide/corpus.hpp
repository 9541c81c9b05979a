#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionguide/scene.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

// A prompt is a 16-d conditioning vector: a small kind component plus a random
// unit direction, normalized. Duplicate prompts (injected at dup_rate) are
// near-copies and get removed by the 0.8-cosine dedup before use.
struct PromptSpec {
  long id = 0;
  Kind kind = Kind::disc;
  Eigen::ArrayXd embedding;

  nlohmann::json to_json() const;
  static PromptSpec from_json(const nlohmann::json& j);
};

// Why an image fails downstream, decided at generation time. The actual label
// always comes from running the dynamics; intent only shapes the mixture.
enum class SceneIntent { good, border, immobile, incomplete };
const char* intent_name(SceneIntent s);
SceneIntent intent_from_name(const std::string& name);

struct CorpusConfig {
  long prompts = 256;         // survivors after dedup, not raw draws
  int images_per_prompt = 8;
  double failure_rate = 0.5;  // border / immobile / incomplete, equal thirds
  double dup_rate = 0.1;      // chance a prompt draw clones an earlier one
  double dedup_threshold = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static CorpusConfig from_json(const nlohmann::json& j);
};

struct CorpusItem {
  long prompt_index = 0;
  SceneIntent intent = SceneIntent::good;
  SceneSpec scene;
};

struct Corpus {
  CorpusConfig config;
  std::vector<PromptSpec> prompts;
  std::vector<CorpusItem> items;
  std::vector<Frame> images;
  long prompt_draws = 0;    // candidates drawn to reach `prompts` survivors
  long dups_rejected = 0;

  long size() const { return static_cast<long>(items.size()); }
  Tensor images_tensor() const;  // (N,1,32,32)
  Tensor cond_tensor() const;    // (N,16), the owning prompt's embedding
};

Corpus generate_corpus(const CorpusConfig& config);

// Fresh conditioning rows for generation, (count, 16); kinds alternate.
Tensor sample_prompt_rows(long count, std::uint64_t seed);

void save_corpus(const std::string& dir, const Corpus& corpus);
Corpus load_corpus(const std::string& dir);

}  // namespace mg
