#include "motionguide/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "motionguide/parallel.hpp"
#include "motionguide/rng.hpp"

namespace mg {

std::vector<long> dedup_embeddings(const std::vector<Eigen::ArrayXd>& embeddings,
                                   double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("dedup_embeddings: threshold must lie in (0,1]");
  std::vector<long> kept;
  std::vector<double> norms;
  for (long i = 0; i < static_cast<long>(embeddings.size()); ++i) {
    const Eigen::ArrayXd& e = embeddings[static_cast<std::size_t>(i)];
    double ni = std::sqrt(e.square().sum());
    bool duplicate = false;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const Eigen::ArrayXd& s = embeddings[static_cast<std::size_t>(kept[k])];
      if (s.size() != e.size())
        throw std::invalid_argument("dedup_embeddings: mixed embedding sizes");
      double denom = ni * norms[k];
      double cos = denom > 0.0 ? (e * s).sum() / denom : 0.0;
      if (cos >= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      kept.push_back(i);
      norms.push_back(ni);
    }
  }
  return kept;
}

std::vector<int> sample_frames(int length, int k) {
  if (k < 2) throw std::invalid_argument("sample_frames: need k >= 2");
  if (k > length)
    throw std::invalid_argument("sample_frames: k exceeds video length " +
                                std::to_string(length));
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>(std::llround(static_cast<double>(i) * (length - 1) / (k - 1)));
  return idx;
}

nlohmann::json FlowFilterConfig::to_json() const {
  return {{"use_magnitude_clause", use_magnitude_clause},
          {"use_component_clause", use_component_clause}};
}

FlowFilterConfig FlowFilterConfig::from_json(const nlohmann::json& j) {
  FlowFilterConfig c;
  c.use_magnitude_clause = j.value("use_magnitude_clause", c.use_magnitude_clause);
  c.use_component_clause = j.value("use_component_clause", c.use_component_clause);
  return c;
}

bool flow_filter(const FlowStats& stats, const FlowFilterConfig& cfg) {
  bool magnitude_reject = cfg.use_magnitude_clause && stats.mean_mag < stats.var_mag;
  bool component_reject = cfg.use_component_clause &&
                          std::abs(stats.mean_u) < 5.0 * stats.var_u &&
                          std::abs(stats.mean_v) < 5.0 * stats.var_v;
  return !(magnitude_reject || component_reject);
}

nlohmann::json JudgeVerdict::to_json() const {
  return {{"visible", visible},
          {"undistorted", undistorted},
          {"consistent", consistent},
          {"moving", moving},
          {"object_motion", object_motion},
          {"pass", pass()}};
}

const char* stage_name(LabelStage s) {
  switch (s) {
    case LabelStage::flow_filter: return "flow_filter";
    case LabelStage::criteria: return "criteria";
    case LabelStage::passed: return "passed";
  }
  return "?";
}

nlohmann::json LabeledPair::to_json() const {
  return {{"item_index", item_index},
          {"label", label},
          {"stage", stage_name(stage)},
          {"stats", stats.to_json()},
          {"verdict", verdict.to_json()}};
}

void LabelingParams::validate() const {
  flow.validate();
  if (!(visibility_frac > 0.0 && visibility_frac < 1.0))
    throw std::invalid_argument("LabelingParams: visibility_frac must lie in (0,1)");
  if (!(elongation_tol > 0.0) || !(area_tol > 0.0))
    throw std::invalid_argument("LabelingParams: tolerances must be > 0");
  if (!(motion_min_px >= 0.0))
    throw std::invalid_argument("LabelingParams: motion_min_px must be >= 0");
  if (!(camera_residual_frac >= 0.0 && camera_residual_frac <= 1.0))
    throw std::invalid_argument("LabelingParams: camera_residual_frac must lie in [0,1]");
  if (!(image_completeness_min >= 0.0 && image_completeness_min <= 1.0))
    throw std::invalid_argument("LabelingParams: image_completeness_min must lie in [0,1]");
  if (k_frames < 2) throw std::invalid_argument("LabelingParams: k_frames must be >= 2");
}

nlohmann::json LabelingParams::to_json() const {
  return {{"filter", filter.to_json()},
          {"flow", flow.to_json()},
          {"visibility_frac", visibility_frac},
          {"elongation_tol", elongation_tol},
          {"area_tol", area_tol},
          {"motion_min_px", motion_min_px},
          {"camera_residual_frac", camera_residual_frac},
          {"image_completeness_min", image_completeness_min},
          {"k_frames", k_frames}};
}

LabelingParams LabelingParams::from_json(const nlohmann::json& j) {
  LabelingParams p;
  if (j.contains("filter")) p.filter = FlowFilterConfig::from_json(j.at("filter"));
  if (j.contains("flow")) p.flow = FlowParams::from_json(j.at("flow"));
  p.visibility_frac = j.value("visibility_frac", p.visibility_frac);
  p.elongation_tol = j.value("elongation_tol", p.elongation_tol);
  p.area_tol = j.value("area_tol", p.area_tol);
  p.motion_min_px = j.value("motion_min_px", p.motion_min_px);
  p.camera_residual_frac = j.value("camera_residual_frac", p.camera_residual_frac);
  p.image_completeness_min = j.value("image_completeness_min", p.image_completeness_min);
  p.k_frames = j.value("k_frames", p.k_frames);
  p.validate();
  return p;
}

JudgeVerdict judge_criteria(const Video& video, const std::vector<int>& frame_indices,
                            const LabelingParams& params) {
  if (frame_indices.empty())
    throw std::invalid_argument("judge_criteria: no frame indices");
  JudgeVerdict v;
  std::vector<Percept> percepts;
  Video sampled;
  for (int idx : frame_indices) {
    if (idx < 0 || idx >= static_cast<int>(video.size()))
      throw std::invalid_argument("judge_criteria: frame index out of range");
    sampled.push_back(video[static_cast<std::size_t>(idx)]);
    percepts.push_back(perceive(sampled.back()));
  }

  v.visible = true;
  for (const Percept& p : percepts)
    if (!p.has_object || p.area_frac < params.visibility_frac) v.visible = false;
  if (!v.visible) return v;  // the remaining geometry reads would be garbage

  const double e0 = percepts.front().elongation;
  v.undistorted = true;
  for (const Percept& p : percepts)
    if (std::abs(p.elongation - e0) > params.elongation_tol * e0) v.undistorted = false;

  double area_min = percepts.front().area_px, area_max = area_min, area_sum = 0;
  for (const Percept& p : percepts) {
    double a = static_cast<double>(p.area_px);
    area_min = std::min(area_min, a);
    area_max = std::max(area_max, a);
    area_sum += a;
  }
  double area_mean = area_sum / static_cast<double>(percepts.size());
  v.consistent = (area_max - area_min) < params.area_tol * area_mean;

  double path = 0;
  for (std::size_t i = 1; i < percepts.size(); ++i) {
    double dx = (percepts[i].cx - percepts[i - 1].cx) * Frame::kSize;
    double dy = (percepts[i].cy - percepts[i - 1].cy) * Frame::kSize;
    path += std::hypot(dx, dy);
  }
  v.moving = path >= params.motion_min_px;

  std::vector<FlowField> fields = optical_flow(sampled, params.flow);
  FlowStats stats = flow_statistics(fields);
  if (stats.mean_mag <= 1e-12) {
    // no measurable flow at all: let the motion criterion own the failure
    v.object_motion = true;
  } else {
    v.object_motion =
        mean_residual_magnitude(fields) >= params.camera_residual_frac * stats.mean_mag;
  }
  return v;
}

LabeledPair label_video(const Video& video, const LabelingParams& params) {
  params.validate();
  LabeledPair out;
  out.stats = flow_statistics(optical_flow(video, params.flow));
  if (!flow_filter(out.stats, params.filter)) {
    out.label = 0;
    out.stage = LabelStage::flow_filter;
    return out;
  }
  std::vector<int> idx = sample_frames(static_cast<int>(video.size()), params.k_frames);
  out.verdict = judge_criteria(video, idx, params);
  if (!out.verdict.pass()) {
    out.label = 0;
    out.stage = LabelStage::criteria;
    return out;
  }
  out.label = 1;
  out.stage = LabelStage::passed;
  return out;
}

std::vector<LabeledPair> label_corpus(const std::vector<Frame>& images,
                                      const DynamicsParams& dyn, DynamicsVariant variant,
                                      const LabelingParams& params, std::uint64_t seed,
                                      int workers) {
  params.validate();
  dyn.validate();
  const long n = static_cast<long>(images.size());
  std::vector<LabeledPair> out(static_cast<std::size_t>(n));
  Rng root = Rng::seeded(seed).split("label_corpus");
  parallel_for(n, workers, [&](long i) {
    Video video = image_to_video(images[static_cast<std::size_t>(i)], dyn.frames, variant,
                                 root.split(static_cast<std::uint64_t>(i)), dyn);
    LabeledPair pair = label_video(video, params);
    pair.item_index = i;
    out[static_cast<std::size_t>(i)] = pair;
  });
  return out;
}

std::vector<int> label_image_priors(const std::vector<Frame>& images,
                                    const LabelingParams& params) {
  params.validate();
  std::vector<int> labels;
  labels.reserve(images.size());
  for (const Frame& f : images) {
    Percept p = perceive(f);
    bool ok = p.has_object && p.area_frac >= params.visibility_frac &&
              p.completeness >= params.image_completeness_min;
    labels.push_back(ok ? 1 : 0);
  }
  return labels;
}

}  // namespace mg
