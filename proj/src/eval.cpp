#include "motionguide/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "motionguide/parallel.hpp"

namespace mg {

double dynamic_degree(const std::vector<FlowStats>& stats, double threshold) {
  if (stats.empty()) throw std::invalid_argument("dynamic_degree: no videos");
  if (!(threshold >= 0.0)) throw std::invalid_argument("dynamic_degree: threshold must be >= 0");
  long dynamic = 0;
  for (const FlowStats& s : stats)
    if (s.mean_mag > threshold) ++dynamic;
  return static_cast<double>(dynamic) / static_cast<double>(stats.size());
}

std::vector<FlowStats> video_flow_stats(const std::vector<Frame>& images,
                                        const DynamicsParams& dyn, DynamicsVariant variant,
                                        const FlowParams& flow, std::uint64_t seed,
                                        int workers) {
  dyn.validate();
  flow.validate();
  const long n = static_cast<long>(images.size());
  std::vector<FlowStats> out(static_cast<std::size_t>(n));
  Rng root = Rng::seeded(seed).split("eval_videos");
  parallel_for(n, workers, [&](long i) {
    Video video = image_to_video(images[static_cast<std::size_t>(i)], dyn.frames, variant,
                                 root.split(static_cast<std::uint64_t>(i)), dyn);
    out[static_cast<std::size_t>(i)] = flow_statistics(optical_flow(video, flow));
  });
  return out;
}

std::vector<double> motion_statistics(const Frame& image, int n_seeds,
                                      DynamicsVariant variant, const DynamicsParams& dyn,
                                      const FlowParams& flow, std::uint64_t seed) {
  if (n_seeds < 1) throw std::invalid_argument("motion_statistics: n_seeds must be >= 1");
  dyn.validate();
  flow.validate();
  Rng root = Rng::seeded(seed).split("motion_stats");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < n_seeds; ++s) {
    Video video = image_to_video(image, dyn.frames, variant,
                                 root.split(static_cast<std::uint64_t>(s)), dyn);
    out.push_back(mean_residual_magnitude(optical_flow(video, flow)));
  }
  return out;
}

LogitSummary logit_summary(const GuidanceClassifier& clf, const std::vector<Frame>& images) {
  if (images.empty()) throw std::invalid_argument("logit_summary: no images");
  const long n = static_cast<long>(images.size());
  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(n));
  const long chunk = 128;
  for (long lo = 0; lo < n; lo += chunk) {
    long b = std::min(chunk, n - lo);
    std::vector<Frame> part(images.begin() + lo, images.begin() + lo + b);
    Tensor z = frames_to_tensor(part);
    std::vector<int> t(static_cast<std::size_t>(b), 0);
    Tensor l = clf.logits(z, t);
    for (long i = 0; i < b; ++i) logits.push_back(l[i]);
  }
  LogitSummary s;
  s.n = n;
  double sum = 0;
  for (double l : logits) sum += l;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double sq = 0;
    for (double l : logits) sq += (l - s.mean) * (l - s.mean);
    s.se = std::sqrt(sq / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return s;
}

}  // namespace mg
