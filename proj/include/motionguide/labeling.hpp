#pragma once

#include <Eigen/Core>
#include <vector>

#include "json.hpp"
#include "motionguide/dynamics.hpp"
#include "motionguide/flow.hpp"
#include "motionguide/scene.hpp"

namespace mg {

// Greedy keep-first dedup: an embedding survives iff its cosine similarity to
// every earlier survivor stays below the threshold. Zero vectors compare as 0.
std::vector<long> dedup_embeddings(const std::vector<Eigen::ArrayXd>& embeddings,
                                   double threshold);

// k frame indices over a length-L video: round(i*(L-1)/(k-1)). Always starts
// at frame 0, always ends at L-1, strictly increasing. Needs 2 <= k <= L.
std::vector<int> sample_frames(int length, int k);

struct FlowFilterConfig {
  bool use_magnitude_clause = true;  // negative when mean_mag < var_mag
  bool use_component_clause = true;  // negative when both |means| drown in 5*var

  nlohmann::json to_json() const;
  static FlowFilterConfig from_json(const nlohmann::json& j);
};

// true = keep for the judge stage, false = negative. A video is rejected when
// flow magnitudes are dominated by their variance, or when both directional
// means are small against five times their variances.
bool flow_filter(const FlowStats& stats, const FlowFilterConfig& cfg = {});

struct JudgeVerdict {
  bool visible = false;        // object present with enough area in every sampled frame
  bool undistorted = false;    // elongation stays near the first sampled frame
  bool consistent = false;     // area span small against the mean
  bool moving = false;         // centroid path long enough
  bool object_motion = false;  // flow residual after removing whole-frame drift

  bool pass() const { return visible && undistorted && consistent && moving && object_motion; }
  nlohmann::json to_json() const;
};

enum class LabelStage { flow_filter, criteria, passed };
const char* stage_name(LabelStage s);

struct LabeledPair {
  long item_index = 0;
  int label = 0;  // 1 = dynamic and well-behaved
  LabelStage stage = LabelStage::passed;
  FlowStats stats;
  JudgeVerdict verdict;

  nlohmann::json to_json() const;
};

struct LabelingParams {
  FlowFilterConfig filter;
  FlowParams flow;
  double visibility_frac = 0.10;      // of the frame
  double elongation_tol = 0.25;       // relative to the first sampled frame
  double area_tol = 0.30;             // span / mean over sampled frames
  double motion_min_px = 1.0;         // centroid path length
  double camera_residual_frac = 0.25; // of mean flow magnitude
  double image_completeness_min = 0.8;
  int k_frames = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static LabelingParams from_json(const nlohmann::json& j);
};

// Criteria run on the sampled frames only; the flow for the object-motion
// check is recomputed on that subsequence.
JudgeVerdict judge_criteria(const Video& video, const std::vector<int>& frame_indices,
                            const LabelingParams& params);

// Full two-stage label for one already-generated video.
LabeledPair label_video(const Video& video, const LabelingParams& params);

// Renders each image through the downstream dynamics and labels the result.
// Per-item seeds split from `seed`, so output is independent of `workers`.
std::vector<LabeledPair> label_corpus(const std::vector<Frame>& images,
                                      const DynamicsParams& dyn, DynamicsVariant variant,
                                      const LabelingParams& params, std::uint64_t seed,
                                      int workers = 1);

// Static-image surrogate labels: visibility and completeness only, no motion.
// Anything this rejects the video labeler rejects too, but not vice versa.
std::vector<int> label_image_priors(const std::vector<Frame>& images,
                                    const LabelingParams& params);

}  // namespace mg
