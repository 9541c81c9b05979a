#pragma once

#include <cstdint>
#include <vector>

#include "motionguide/classifier.hpp"
#include "motionguide/dynamics.hpp"
#include "motionguide/flow.hpp"

namespace mg {

// Fraction of videos whose pooled mean flow magnitude clears the threshold.
// An empty batch is a caller bug, not a zero.
double dynamic_degree(const std::vector<FlowStats>& stats, double threshold);

// Pushes every image through the downstream dynamics once and measures flow.
// Per-item seeds split from `seed`; output is independent of `workers`.
std::vector<FlowStats> video_flow_stats(const std::vector<Frame>& images,
                                        const DynamicsParams& dyn, DynamicsVariant variant,
                                        const FlowParams& flow, std::uint64_t seed,
                                        int workers = 1);

// Repeated rollouts of a single image under fresh dynamics seeds. Returns one
// mean residual flow magnitude per rollout (whole-frame drift removed), in
// seed order.
std::vector<double> motion_statistics(const Frame& image, int n_seeds,
                                      DynamicsVariant variant, const DynamicsParams& dyn,
                                      const FlowParams& flow, std::uint64_t seed);

struct LogitSummary {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean, 0 for n < 2
  long n = 0;
};

// Classifier logits on clean images at t = 0; deterministic, no noise draw.
LogitSummary logit_summary(const GuidanceClassifier& clf, const std::vector<Frame>& images);

}  // namespace mg
