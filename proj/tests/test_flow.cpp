#include <cmath>

#include "doctest.h"
#include "motionguide/flow.hpp"
#include "motionguide/scene.hpp"

using namespace mg;

namespace {

// Integer-shift of a frame: out(y,x) = in(y - dy, x - dx), zeros outside.
Frame shifted(const Frame& in, int dy, int dx) {
  Frame out;
  for (int y = 0; y < Frame::kSize; ++y)
    for (int x = 0; x < Frame::kSize; ++x) {
      int sy = y - dy, sx = x - dx;
      if (sy < 0 || sy >= Frame::kSize || sx < 0 || sx >= Frame::kSize) continue;
      out.at(y, x) = in.at(sy, sx);
    }
  return out;
}

Frame test_disc() {
  SceneSpec s;
  s.cx = 0.45;
  s.cy = 0.5;
  s.radius = 0.2;
  return render(s);
}

FlowField make_field(std::initializer_list<double> u, std::initializer_list<double> v,
                     std::initializer_list<double> valid, int h, int w) {
  FlowField f;
  f.h = h;
  f.w = w;
  f.u = Eigen::ArrayXd(static_cast<long>(u.size()));
  f.v = Eigen::ArrayXd(static_cast<long>(v.size()));
  f.valid = Eigen::ArrayXd(static_cast<long>(valid.size()));
  long i = 0;
  for (double x : u) f.u[i++] = x;
  i = 0;
  for (double x : v) f.v[i++] = x;
  i = 0;
  for (double x : valid) f.valid[i++] = x;
  return f;
}

}  // namespace

TEST_CASE("static frames produce zero flow") {
  Frame a = test_disc();
  FlowField f = lucas_kanade(a, a);
  // the temporal derivative vanishes identically, so every valid window
  // reports exactly zero motion
  CHECK((f.valid * f.u).abs().maxCoeff() == 0.0);
  CHECK((f.valid * f.v).abs().maxCoeff() == 0.0);
  CHECK(f.valid.sum() > 0);  // edges still have texture
}

TEST_CASE("unit horizontal shift is recovered") {
  Frame a = test_disc();
  Frame b = shifted(a, 0, 1);
  FlowField f = lucas_kanade(a, b);
  FlowStats s = flow_statistics({f});
  REQUIRE(s.n_valid > 0);
  CHECK(std::abs(s.mean_u - 1.0) < 0.2);  // within 20% of +1 px
  CHECK(std::abs(s.mean_v) < 0.2);
}

TEST_CASE("unit vertical shift is recovered with the right sign") {
  Frame a = test_disc();
  Frame b = shifted(a, 1, 0);
  FlowStats s = flow_statistics({lucas_kanade(a, b)});
  REQUIRE(s.n_valid > 0);
  CHECK(std::abs(s.mean_v - 1.0) < 0.2);
  CHECK(std::abs(s.mean_u) < 0.2);
}

TEST_CASE("flow estimates are clamped to max_flow") {
  Frame a = test_disc();
  Frame b = shifted(a, 0, 6);  // far beyond the linearization range
  FlowParams p;
  p.max_flow = 1.5;
  FlowField f = lucas_kanade(a, b, p);
  CHECK(f.u.abs().maxCoeff() <= 1.5);
  CHECK(f.v.abs().maxCoeff() <= 1.5);
}

TEST_CASE("flat frames yield no valid windows") {
  Frame flat;
  flat.pix.setConstant(0.5);
  FlowField f = lucas_kanade(flat, flat);
  CHECK(f.valid.sum() == 0.0);
  FlowStats s = flow_statistics({f});
  CHECK(s.n_valid == 0);
  CHECK(s.mean_mag == 0.0);
  CHECK(s.var_u == 0.0);
}

TEST_CASE("raising tau shrinks the valid set") {
  Frame a = test_disc();
  Frame b = shifted(a, 0, 1);
  FlowParams loose;
  loose.tau = 0.01;
  FlowParams strict;
  strict.tau = 0.5;
  double n_loose = lucas_kanade(a, b, loose).valid.sum();
  double n_strict = lucas_kanade(a, b, strict).valid.sum();
  CHECK(n_strict < n_loose);
}

TEST_CASE("optical_flow runs per consecutive pair") {
  Frame a = test_disc();
  Video v = {a, shifted(a, 0, 1), shifted(a, 0, 2)};
  std::vector<FlowField> fields = optical_flow(v);
  CHECK(fields.size() == 2);
  CHECK_THROWS(optical_flow({a}));
}

TEST_CASE("flow_statistics equals directly computed population moments") {
  // independent re-implementation on a handcrafted pair of fields
  FlowField f1 = make_field({1.0, 2.0, 0.0, 3.0}, {0.5, -1.0, 9.0, 0.0},
                            {1, 1, 0, 1}, 2, 2);
  FlowField f2 = make_field({-2.0, 0.0, 4.0, 1.0}, {0.0, 0.0, 2.0, -3.0},
                            {1, 0, 1, 1}, 2, 2);
  FlowStats s = flow_statistics({f1, f2});
  REQUIRE(s.n_valid == 6);

  std::vector<double> us = {1.0, 2.0, 3.0, -2.0, 4.0, 1.0};
  std::vector<double> vs = {0.5, -1.0, 0.0, 0.0, 2.0, -3.0};
  double mu = 0, mv = 0, mm = 0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    mu += us[i];
    mv += vs[i];
    mm += std::hypot(us[i], vs[i]);
  }
  mu /= 6;
  mv /= 6;
  mm /= 6;
  double vu = 0, vv = 0, vm = 0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    vu += (us[i] - mu) * (us[i] - mu);
    vv += (vs[i] - mv) * (vs[i] - mv);
    double m = std::hypot(us[i], vs[i]);
    vm += (m - mm) * (m - mm);
  }
  CHECK(s.mean_u == doctest::Approx(mu).epsilon(1e-12));
  CHECK(s.mean_v == doctest::Approx(mv).epsilon(1e-12));
  CHECK(s.mean_mag == doctest::Approx(mm).epsilon(1e-12));
  CHECK(s.var_u == doctest::Approx(vu / 6).epsilon(1e-12));
  CHECK(s.var_v == doctest::Approx(vv / 6).epsilon(1e-12));
  CHECK(s.var_mag == doctest::Approx(vm / 6).epsilon(1e-12));
}

TEST_CASE("flow stats json round trip") {
  FlowField f = make_field({1.0, 2.0}, {0.5, -1.0}, {1, 1}, 1, 2);
  FlowStats s = flow_statistics({f});
  FlowStats r = FlowStats::from_json(s.to_json());
  CHECK(r.mean_u == s.mean_u);
  CHECK(r.var_mag == s.var_mag);
  CHECK(r.n_valid == s.n_valid);
}

TEST_CASE("residual magnitude removes whole-frame drift") {
  // fully valid uniform flow: the spatial mean absorbs everything
  const int n = 16;
  FlowField uniform;
  uniform.h = uniform.w = 4;
  uniform.u = Eigen::ArrayXd::Constant(n, 1.3);
  uniform.v = Eigen::ArrayXd::Constant(n, -0.4);
  uniform.valid = Eigen::ArrayXd::Ones(n);
  CHECK(mean_residual_magnitude({uniform}) == doctest::Approx(0.0).epsilon(1e-12));

  // localized motion survives: one valid cell moving, grid mean is diluted
  FlowField local;
  local.h = local.w = 4;
  local.u = Eigen::ArrayXd::Zero(n);
  local.v = Eigen::ArrayXd::Zero(n);
  local.valid = Eigen::ArrayXd::Zero(n);
  local.u[5] = 2.0;
  local.valid[5] = 1.0;
  // spatial mean over the full grid = 2/16; residual = 2 - 2/16
  CHECK(mean_residual_magnitude({local}) == doctest::Approx(2.0 - 2.0 / 16.0).epsilon(1e-12));

  CHECK(mean_residual_magnitude({}) == 0.0);
}

TEST_CASE("flow params validate and round trip") {
  FlowParams p;
  p.window = 7;
  p.tau = 0.1;
  FlowParams r = FlowParams::from_json(p.to_json());
  CHECK(r.window == 7);
  CHECK(r.tau == 0.1);
  CHECK_THROWS(FlowParams::from_json({{"window", 4}}));
  CHECK_THROWS(FlowParams::from_json({{"tau", 0.0}}));
  CHECK_THROWS(FlowParams::from_json({{"max_flow", -1.0}}));
}
