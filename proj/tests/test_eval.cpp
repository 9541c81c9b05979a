#include <cmath>

#include "doctest.h"
#include "motionguide/eval.hpp"
#include "motionguide/scene.hpp"

using namespace mg;

namespace {

Frame disc_frame(double cx, double cy, double r) {
  SceneSpec s;
  s.kind = Kind::disc;
  s.cx = cx;
  s.cy = cy;
  s.radius = r;
  return render(s);
}

bool stats_equal(const FlowStats& a, const FlowStats& b) {
  return a.mean_u == b.mean_u && a.mean_v == b.mean_v && a.var_u == b.var_u &&
         a.var_v == b.var_v && a.mean_mag == b.mean_mag && a.var_mag == b.var_mag;
}

}  // namespace

TEST_CASE("dynamic_degree counts strict threshold crossings") {
  std::vector<FlowStats> stats(3);
  stats[0].mean_mag = 0.1;
  stats[1].mean_mag = 0.3;
  stats[2].mean_mag = 0.5;
  CHECK(dynamic_degree(stats, 0.25) == doctest::Approx(2.0 / 3.0));
  CHECK(dynamic_degree(stats, 0.0) == 1.0);
  CHECK(dynamic_degree(stats, 10.0) == 0.0);

  // the comparison is strict: sitting exactly on the threshold is not dynamic
  std::vector<FlowStats> edge(1);
  edge[0].mean_mag = 0.25;
  CHECK(dynamic_degree(edge, 0.25) == 0.0);

  CHECK_THROWS(dynamic_degree({}, 0.25));
  CHECK_THROWS(dynamic_degree(stats, -1.0));
}

TEST_CASE("video_flow_stats is independent of the worker count") {
  std::vector<Frame> images = {disc_frame(0.4, 0.5, 0.2), disc_frame(0.6, 0.4, 0.24),
                               disc_frame(0.5, 0.6, 0.18)};
  DynamicsParams dyn;
  FlowParams flow;

  std::vector<FlowStats> w1 = video_flow_stats(images, dyn, DynamicsVariant::A, flow, 17, 1);
  std::vector<FlowStats> w3 = video_flow_stats(images, dyn, DynamicsVariant::A, flow, 17, 3);
  REQUIRE(w1.size() == images.size());
  REQUIRE(w3.size() == images.size());
  for (std::size_t i = 0; i < w1.size(); ++i) CHECK(stats_equal(w1[i], w3[i]));

  // same seed, same numbers; a mobile interior disc shows real flow
  std::vector<FlowStats> again = video_flow_stats(images, dyn, DynamicsVariant::A, flow, 17, 2);
  for (std::size_t i = 0; i < w1.size(); ++i) CHECK(stats_equal(w1[i], again[i]));
  CHECK(w1[0].mean_mag > 0.05);

  std::vector<FlowStats> other = video_flow_stats(images, dyn, DynamicsVariant::A, flow, 18, 1);
  bool any_diff = false;
  for (std::size_t i = 0; i < w1.size(); ++i) any_diff = any_diff || !stats_equal(w1[i], other[i]);
  CHECK(any_diff);
}

TEST_CASE("motion_statistics separates mobile from stuck scenes") {
  DynamicsParams dyn;
  FlowParams flow;
  Frame mobile = disc_frame(0.5, 0.5, 0.2);
  Frame stuck = disc_frame(0.08, 0.5, 0.1);  // touching the left border

  std::vector<double> m = motion_statistics(mobile, 10, DynamicsVariant::A, dyn, flow, 3);
  std::vector<double> s = motion_statistics(stuck, 10, DynamicsVariant::A, dyn, flow, 3);
  REQUIRE(m.size() == 10);
  REQUIRE(s.size() == 10);

  std::vector<double> m2 = motion_statistics(mobile, 10, DynamicsVariant::A, dyn, flow, 3);
  CHECK(m == m2);  // same seed, identical rollouts

  double mean_m = 0.0, mean_s = 0.0;
  for (double v : m) mean_m += v / 10.0;
  for (double v : s) mean_s += v / 10.0;
  CHECK(mean_m > mean_s);

  CHECK_THROWS(motion_statistics(mobile, 0, DynamicsVariant::A, dyn, flow, 3));
}

TEST_CASE("logit_summary matches a direct computation") {
  Denoiser enc = Denoiser::init(Rng::seeded(51));
  GuidanceClassifier clf(&enc, Rng::seeded(52));
  std::vector<Frame> images = {disc_frame(0.4, 0.5, 0.2), disc_frame(0.6, 0.5, 0.25),
                               disc_frame(0.5, 0.3, 0.15), disc_frame(0.3, 0.7, 0.22),
                               disc_frame(0.7, 0.6, 0.18)};

  LogitSummary s = logit_summary(clf, images);
  CHECK(s.n == 5);

  Tensor z = frames_to_tensor(images);
  std::vector<int> t(5, 0);
  Tensor logits = clf.logits(z, t);
  double mean = 0.0;
  for (long i = 0; i < 5; ++i) mean += logits[i] / 5.0;
  double sq = 0.0;
  for (long i = 0; i < 5; ++i) sq += (logits[i] - mean) * (logits[i] - mean);
  double se = std::sqrt(sq / 4.0) / std::sqrt(5.0);
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.se == doctest::Approx(se).epsilon(1e-12));

  LogitSummary one = logit_summary(clf, {images[0]});
  CHECK(one.n == 1);
  CHECK(one.se == 0.0);
  CHECK(one.mean == doctest::Approx(logits[0]).epsilon(1e-12));

  CHECK_THROWS(logit_summary(clf, {}));
}
