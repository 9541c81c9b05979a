#include "motionguide/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "motionguide/rng.hpp"
#include "motionguide/serialize.hpp"

namespace mg {

namespace {

constexpr int kCondDim = 16;
constexpr double kKindWeight = 0.3;  // keeps random unit parts far apart at cos 0.8

Eigen::ArrayXd normalized(Eigen::ArrayXd e) {
  double n = std::sqrt(e.square().sum());
  if (n <= 0.0) throw std::runtime_error("corpus: zero-norm embedding");
  return e / n;
}

Eigen::ArrayXd fresh_embedding(Kind kind, Rng& rng) {
  Eigen::ArrayXd e = Eigen::ArrayXd::Zero(kCondDim);
  e[kind == Kind::disc ? 0 : 1] = kKindWeight;
  Eigen::ArrayXd g(kCondDim - 2);
  for (int i = 0; i < kCondDim - 2; ++i) g[i] = rng.normal();
  g = normalized(g);
  const double w = std::sqrt(1.0 - kKindWeight * kKindWeight);
  for (int i = 0; i < kCondDim - 2; ++i) e[2 + i] = w * g[i];
  return normalized(e);
}

double cosine(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  double na = std::sqrt(a.square().sum()), nb = std::sqrt(b.square().sum());
  return na > 0 && nb > 0 ? (a * b).sum() / (na * nb) : 0.0;
}

// Half-extents in pixels along x and y for the rendered shape.
void extents(Kind kind, double radius, double& ex, double& ey) {
  ex = radius * Frame::kSize;
  ey = (kind == Kind::disc ? radius : 0.5 * radius) * Frame::kSize;
}

SceneSpec sample_scene(Kind kind, SceneIntent intent, Rng& rng) {
  const double n = Frame::kSize;
  SceneSpec s;
  s.kind = kind;
  s.radius = kind == Kind::disc ? rng.uniform(0.20, 0.28) : rng.uniform(0.26, 0.33);
  s.completeness = 1.0;
  double ex, ey;
  extents(kind, s.radius, ex, ey);

  // `margin` is the distance from the bbox to the nearest border; one border
  // is pinned at exactly that margin so perceived mobility tracks it.
  auto place = [&](double margin) {
    int side = static_cast<int>(rng.uniform_int(4));
    double other_margin_max_x = n - margin - 2.0 * ex;
    double other_margin_max_y = n - margin - 2.0 * ey;
    double cx, cy;
    if (side == 0 || side == 1) {  // pin left or right
      cx = side == 0 ? margin + ex : n - margin - ex;
      cy = rng.uniform(margin + ey, margin + ey + std::max(other_margin_max_y - margin, 0.0));
    } else {  // pin top or bottom
      cy = side == 2 ? margin + ey : n - margin - ey;
      cx = rng.uniform(margin + ex, margin + ex + std::max(other_margin_max_x - margin, 0.0));
    }
    s.cx = cx / n;
    s.cy = cy / n;
  };

  switch (intent) {
    case SceneIntent::good: {
      double margin = rng.uniform(3.2, 8.0);
      margin = std::min(margin, 0.5 * (n - 2.0 * std::max(ex, ey)) - 0.5);
      place(margin);
      break;
    }
    case SceneIntent::immobile: {
      place(rng.uniform(0.0, 0.9));
      break;
    }
    case SceneIntent::border: {
      // hang a slice of the object past one border: `overhang` is the cut
      // depth as a fraction of the half-extent, small enough that the image
      // still clears the 10% visibility bar
      int side = static_cast<int>(rng.uniform_int(4));
      double overhang = rng.uniform(0.1, 0.4);
      double safe = rng.uniform(2.0, 6.0);
      double cx, cy;
      if (side == 0 || side == 1) {
        cx = side == 0 ? ex * (1.0 - overhang) : n - ex * (1.0 - overhang);
        cy = rng.uniform(safe + ey, n - safe - ey);
      } else {
        cy = side == 2 ? ey * (1.0 - overhang) : n - ey * (1.0 - overhang);
        cx = rng.uniform(safe + ex, n - safe - ex);
      }
      s.cx = cx / n;
      s.cy = cy / n;
      break;
    }
    case SceneIntent::incomplete: {
      s.completeness = rng.uniform(0.45, 0.75);
      double margin = rng.uniform(3.2, 8.0);
      margin = std::min(margin, 0.5 * (n - 2.0 * std::max(ex, ey)) - 0.5);
      place(margin);
      break;
    }
  }
  s.cx = std::clamp(s.cx, 0.0, 1.0);
  s.cy = std::clamp(s.cy, 0.0, 1.0);
  s.validate();
  return s;
}

}  // namespace

nlohmann::json PromptSpec::to_json() const {
  std::vector<double> e(embedding.data(), embedding.data() + embedding.size());
  return {{"id", id}, {"kind", kind_name(kind)}, {"embedding", e}};
}

PromptSpec PromptSpec::from_json(const nlohmann::json& j) {
  PromptSpec p;
  p.id = j.at("id").get<long>();
  p.kind = kind_from_name(j.at("kind").get<std::string>());
  std::vector<double> e = j.at("embedding").get<std::vector<double>>();
  p.embedding = Eigen::Map<const Eigen::ArrayXd>(e.data(), static_cast<long>(e.size()));
  return p;
}

const char* intent_name(SceneIntent s) {
  switch (s) {
    case SceneIntent::good: return "good";
    case SceneIntent::border: return "border";
    case SceneIntent::immobile: return "immobile";
    case SceneIntent::incomplete: return "incomplete";
  }
  return "?";
}

SceneIntent intent_from_name(const std::string& name) {
  if (name == "good") return SceneIntent::good;
  if (name == "border") return SceneIntent::border;
  if (name == "immobile") return SceneIntent::immobile;
  if (name == "incomplete") return SceneIntent::incomplete;
  throw std::invalid_argument("unknown scene intent '" + name + "'");
}

void CorpusConfig::validate() const {
  if (prompts < 1) throw std::invalid_argument("CorpusConfig: prompts must be >= 1");
  if (images_per_prompt < 1)
    throw std::invalid_argument("CorpusConfig: images_per_prompt must be >= 1");
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0))
    throw std::invalid_argument("CorpusConfig: failure_rate must lie in [0,1]");
  if (!(dup_rate >= 0.0 && dup_rate < 1.0))
    throw std::invalid_argument("CorpusConfig: dup_rate must lie in [0,1)");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0))
    throw std::invalid_argument("CorpusConfig: dedup_threshold must lie in (0,1]");
}

nlohmann::json CorpusConfig::to_json() const {
  return {{"prompts", prompts},
          {"images_per_prompt", images_per_prompt},
          {"failure_rate", failure_rate},
          {"dup_rate", dup_rate},
          {"dedup_threshold", dedup_threshold},
          {"seed", seed}};
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c;
  c.prompts = j.value("prompts", c.prompts);
  c.images_per_prompt = j.value("images_per_prompt", c.images_per_prompt);
  c.failure_rate = j.value("failure_rate", c.failure_rate);
  c.dup_rate = j.value("dup_rate", c.dup_rate);
  c.dedup_threshold = j.value("dedup_threshold", c.dedup_threshold);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

Tensor Corpus::images_tensor() const { return frames_to_tensor(images); }

Tensor Corpus::cond_tensor() const {
  const long n = size();
  Tensor t = Tensor::zeros({n, kCondDim});
  for (long i = 0; i < n; ++i) {
    const PromptSpec& p = prompts[static_cast<std::size_t>(
        items[static_cast<std::size_t>(i)].prompt_index)];
    t.array().segment(i * kCondDim, kCondDim) = p.embedding;
  }
  return t;
}

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.config = config;

  Rng root = Rng::seeded(config.seed).split("corpus");
  Rng prompt_rng = root.split("prompts");

  // Draw candidates until `prompts` survive the greedy keep-first dedup. The
  // acceptance rule matches dedup_embeddings: a candidate survives iff its
  // cosine to every survivor is below the threshold.
  const long max_draws = 50 * config.prompts + 100;
  while (static_cast<long>(corpus.prompts.size()) < config.prompts) {
    if (corpus.prompt_draws >= max_draws)
      throw std::runtime_error("generate_corpus: embedding space saturated before reaching " +
                               std::to_string(config.prompts) + " prompts");
    ++corpus.prompt_draws;
    PromptSpec cand;
    if (!corpus.prompts.empty() && prompt_rng.bernoulli(config.dup_rate)) {
      const PromptSpec& base = corpus.prompts[static_cast<std::size_t>(
          prompt_rng.uniform_int(corpus.prompts.size()))];
      cand.kind = base.kind;
      cand.embedding = base.embedding;
      for (long i = 0; i < cand.embedding.size(); ++i)
        cand.embedding[i] += prompt_rng.normal(0.0, 0.01);
      cand.embedding = normalized(cand.embedding);
    } else {
      cand.kind = prompt_rng.bernoulli(0.5) ? Kind::bar : Kind::disc;
      cand.embedding = fresh_embedding(cand.kind, prompt_rng);
    }
    bool duplicate = false;
    for (const PromptSpec& kept : corpus.prompts)
      if (cosine(cand.embedding, kept.embedding) >= config.dedup_threshold) {
        duplicate = true;
        break;
      }
    if (duplicate) {
      ++corpus.dups_rejected;
      continue;
    }
    cand.id = static_cast<long>(corpus.prompts.size());
    corpus.prompts.push_back(std::move(cand));
  }

  Rng scene_root = root.split("scenes");
  const long n_items = config.prompts * config.images_per_prompt;
  corpus.items.reserve(static_cast<std::size_t>(n_items));
  corpus.images.reserve(static_cast<std::size_t>(n_items));
  for (long pi = 0; pi < config.prompts; ++pi) {
    for (int k = 0; k < config.images_per_prompt; ++k) {
      long idx = pi * config.images_per_prompt + k;
      Rng rng = scene_root.split(static_cast<std::uint64_t>(idx));
      CorpusItem item;
      item.prompt_index = pi;
      if (rng.bernoulli(config.failure_rate)) {
        switch (rng.uniform_int(3)) {
          case 0: item.intent = SceneIntent::border; break;
          case 1: item.intent = SceneIntent::immobile; break;
          default: item.intent = SceneIntent::incomplete; break;
        }
      } else {
        item.intent = SceneIntent::good;
      }
      item.scene = sample_scene(corpus.prompts[static_cast<std::size_t>(pi)].kind,
                                item.intent, rng);
      corpus.images.push_back(render(item.scene));
      corpus.items.push_back(std::move(item));
    }
  }
  return corpus;
}

Tensor sample_prompt_rows(long count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_prompt_rows: count must be >= 1");
  Rng root = Rng::seeded(seed).split("gen_prompts");
  Tensor t = Tensor::zeros({count, kCondDim});
  for (long i = 0; i < count; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    Kind kind = i % 2 == 0 ? Kind::disc : Kind::bar;
    t.array().segment(i * kCondDim, kCondDim) = fresh_embedding(kind, rng);
  }
  return t;
}

void save_corpus(const std::string& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  write_tensor(dir + "/images.bin", corpus.images_tensor());
  write_tensor(dir + "/cond.bin", corpus.cond_tensor());
  nlohmann::json meta;
  meta["config"] = corpus.config.to_json();
  meta["prompt_draws"] = corpus.prompt_draws;
  meta["dups_rejected"] = corpus.dups_rejected;
  nlohmann::json prompts = nlohmann::json::array();
  for (const PromptSpec& p : corpus.prompts) prompts.push_back(p.to_json());
  meta["prompts"] = std::move(prompts);
  nlohmann::json items = nlohmann::json::array();
  for (const CorpusItem& it : corpus.items)
    items.push_back({{"prompt_index", it.prompt_index},
                     {"intent", intent_name(it.intent)},
                     {"scene", it.scene.to_json()}});
  meta["items"] = std::move(items);
  write_json(dir + "/meta.json", meta);
}

Corpus load_corpus(const std::string& dir) {
  nlohmann::json meta = read_json(dir + "/meta.json");
  Corpus corpus;
  corpus.config = CorpusConfig::from_json(meta.at("config"));
  corpus.prompt_draws = meta.value("prompt_draws", 0L);
  corpus.dups_rejected = meta.value("dups_rejected", 0L);
  for (const nlohmann::json& j : meta.at("prompts"))
    corpus.prompts.push_back(PromptSpec::from_json(j));
  for (const nlohmann::json& j : meta.at("items")) {
    CorpusItem it;
    it.prompt_index = j.at("prompt_index").get<long>();
    it.intent = intent_from_name(j.at("intent").get<std::string>());
    it.scene = SceneSpec::from_json(j.at("scene"));
    corpus.items.push_back(std::move(it));
  }
  Tensor images = read_tensor(dir + "/images.bin");
  const long per = Frame::kSize * Frame::kSize;
  if (images.size() != static_cast<long>(corpus.items.size()) * per)
    throw std::runtime_error("load_corpus: images.bin does not match meta.json");
  for (long i = 0; i < static_cast<long>(corpus.items.size()); ++i)
    corpus.images.push_back(tensor_row_to_frame(images, i));
  return corpus;
}

}  // namespace mg
