#include <cmath>

#include "doctest.h"
#include "motionguide/dynamics.hpp"
#include "motionguide/scene.hpp"

using namespace mg;

namespace {
SceneSpec disc_at(double cx, double cy, double r) {
  SceneSpec s;
  s.kind = Kind::disc;
  s.cx = cx;
  s.cy = cy;
  s.radius = r;
  return s;
}
}  // namespace

TEST_CASE("rendered disc round trips through perceive") {
  SceneSpec spec = disc_at(0.5, 0.5, 0.25);
  Frame f = render(spec);
  // mass close to pi r^2 in pixel units
  double mass = f.pix.sum();
  double expect = 3.14159265 * 0.25 * 0.25 * 32 * 32;
  CHECK(std::abs(mass - expect) / expect < 0.05);

  Percept p = perceive(f);
  CHECK(p.has_object);
  CHECK(p.kind == Kind::disc);
  CHECK(p.cx == doctest::Approx(0.5).epsilon(0.03));
  CHECK(p.cy == doctest::Approx(0.5).epsilon(0.03));
  CHECK(p.radius == doctest::Approx(0.25).epsilon(0.1));
  CHECK(p.completeness > 0.9);
  CHECK_FALSE(p.border_contact);
  CHECK(p.mobility == 1.0);  // 8+ px of margin saturates the scale
  CHECK(p.elongation < 1.2);
}

TEST_CASE("rendered bar is perceived as elongated") {
  SceneSpec s;
  s.kind = Kind::bar;
  s.cx = 0.5;
  s.cy = 0.5;
  s.radius = 0.22;
  Frame f = render(s);
  Percept p = perceive(f);
  CHECK(p.has_object);
  CHECK(p.elongation > 1.5);
  CHECK(p.kind == Kind::bar);
  // bbox is 2:1, width against twice the height
  double w = p.x1 - p.x0 + 1, h = p.y1 - p.y0 + 1;
  CHECK(w / h == doctest::Approx(2.0).epsilon(0.15));
  CHECK(p.completeness > 0.9);
}

TEST_CASE("completeness cut shows up in the percept") {
  SceneSpec s = disc_at(0.5, 0.5, 0.25);
  s.completeness = 0.8;
  Frame f = render(s);
  Percept p = perceive(f);
  CHECK(p.kind == Kind::disc);
  CHECK(p.completeness == doctest::Approx(0.8).epsilon(0.1));
  CHECK(p.completeness < 0.95);

  // a deeper cut makes the remnant tall enough to read as a bar, and the
  // expected width doubles with it
  s.completeness = 0.6;
  Percept q = perceive(render(s));
  CHECK(q.kind == Kind::bar);
  CHECK(q.completeness == doctest::Approx(0.3).epsilon(0.15));
}

TEST_CASE("border placement is detected") {
  SceneSpec s = disc_at(0.12, 0.5, 0.12);  // left edge touches the frame
  Frame f = render(s);
  Percept p = perceive(f);
  CHECK(p.border_contact);
  CHECK(p.mobility == 0.0);

  SceneSpec tight = disc_at(0.5, 0.5, 0.42);  // interior but almost no margin
  Percept q = perceive(render(tight));
  CHECK_FALSE(q.border_contact);
  CHECK(q.mobility < 0.5);
}

TEST_CASE("perceive picks the largest component") {
  Frame f;
  // 2x2 blob and a 3x2 blob, separated
  for (int y = 2; y < 4; ++y)
    for (int x = 2; x < 4; ++x) f.at(y, x) = 1.0;
  for (int y = 20; y < 23; ++y)
    for (int x = 10; x < 12; ++x) f.at(y, x) = 1.0;
  CHECK(largest_component_pixels(f).size() == 6);
  Percept p = perceive(f);
  CHECK(p.area_px == 6);
  CHECK(p.cy == doctest::Approx((21.0 + 0.5) / 32).epsilon(0.01));
}

TEST_CASE("scene validation rejects out-of-range specs") {
  SceneSpec s = disc_at(0.5, 0.5, 0.25);
  s.radius = 0.6;
  CHECK_THROWS(s.validate());
  s = disc_at(1.2, 0.5, 0.25);
  CHECK_THROWS(s.validate());
  s = disc_at(0.5, 0.5, 0.25);
  s.completeness = 0.0;
  CHECK_THROWS(s.validate());
  s = disc_at(0.5, 0.5, 0.004);  // valid spec, but renders under one pixel
  CHECK_THROWS(render(s));
}

TEST_CASE("scene json round trip") {
  SceneSpec s;
  s.kind = Kind::bar;
  s.cx = 0.3;
  s.cy = 0.7;
  s.radius = 0.2;
  s.completeness = 0.85;
  s.mobility = 0.5;
  SceneSpec r = SceneSpec::from_json(s.to_json());
  CHECK(r.kind == Kind::bar);
  CHECK(r.cx == 0.3);
  CHECK(r.completeness == 0.85);
  CHECK_THROWS(SceneSpec::from_json({{"kind", "triangle"}}));
}

TEST_CASE("frame tensor conversions round trip") {
  Frame a = render(disc_at(0.4, 0.6, 0.2));
  Frame b = render(disc_at(0.6, 0.4, 0.15));
  Tensor t = frames_to_tensor({a, b});
  CHECK(t.shape() == Shape{2, 1, 32, 32});
  CHECK((tensor_row_to_frame(t, 0).pix == a.pix).all());
  CHECK((tensor_row_to_frame(t, 1).pix == b.pix).all());
  CHECK_THROWS(tensor_row_to_frame(t, 2));

  Video v = {a, b};
  Tensor vt = video_to_tensor(v);
  CHECK(vt.shape() == Shape{2, 32, 32});
  Video back = tensor_to_video(vt);
  CHECK((back[0].pix == a.pix).all());
  CHECK((back[1].pix == b.pix).all());
}

TEST_CASE("mobile object translates along the variant axis") {
  Frame img = render(disc_at(0.5, 0.5, 0.15));
  DynamicsParams params;

  Video va = image_to_video(img, 8, DynamicsVariant::A, Rng::seeded(1), params);
  CHECK(va.size() == 8);
  Percept first = perceive(va.front());
  Percept last = perceive(va.back());
  double dx = (last.cx - first.cx) * 32;
  double dy = (last.cy - first.cy) * 32;
  CHECK(std::abs(dx) > 5.0);             // ~1.6 px/frame over 7 transitions
  CHECK(std::abs(dy) < std::abs(dx) / 2);
  CHECK(mean_displacement(va) > 1.0);
  CHECK(mean_displacement(va) < 2.2);

  Video vb = image_to_video(img, 8, DynamicsVariant::B, Rng::seeded(1), params);
  Percept lastb = perceive(vb.back());
  double dxb = (lastb.cx - first.cx) * 32;
  double dyb = (lastb.cy - first.cy) * 32;
  CHECK(std::abs(dyb) > 3.5);            // slower vertical speed
  CHECK(std::abs(dxb) < std::abs(dyb) / 2);
}

TEST_CASE("border contact and low mobility freeze the object") {
  DynamicsParams params;
  Frame border_img = render(disc_at(0.12, 0.5, 0.12));
  Video v = image_to_video(border_img, 8, DynamicsVariant::A, Rng::seeded(2), params);
  CHECK(mean_displacement(v) < 0.3);

  // interior but under the mobility floor: margin 1 px -> mobility 0.125
  Frame tight = render(disc_at(0.5, 0.5, 0.46));
  Percept p = perceive(tight);
  REQUIRE_FALSE(p.border_contact);
  REQUIRE(p.mobility < params.mobility_floor);
  Video v2 = image_to_video(tight, 8, DynamicsVariant::A, Rng::seeded(3), params);
  CHECK(mean_displacement(v2) < 0.3);
}

TEST_CASE("incomplete objects move but shear progressively") {
  SceneSpec s = disc_at(0.5, 0.5, 0.2);
  s.completeness = 0.55;
  Frame img = render(s);
  REQUIRE(perceive(img).completeness < 0.8);
  Video v = image_to_video(img, 8, DynamicsVariant::A, Rng::seeded(4));
  CHECK(mean_displacement(v) > 0.5);
  double e0 = perceive(v.front()).elongation;
  double e7 = perceive(v.back()).elongation;
  CHECK(e7 > e0 + 0.1);  // distortion accumulates frame over frame
}

TEST_CASE("empty frame yields exact copies") {
  Frame empty;
  Video v = image_to_video(empty, 5, DynamicsVariant::A, Rng::seeded(5));
  CHECK(v.size() == 5);
  for (const Frame& f : v) CHECK((f.pix == empty.pix).all());
  CHECK(mean_displacement(v) == 0.0);
}

TEST_CASE("dynamics are deterministic per seed") {
  Frame img = render(disc_at(0.4, 0.5, 0.18));
  Video a = image_to_video(img, 6, DynamicsVariant::A, Rng::seeded(7));
  Video b = image_to_video(img, 6, DynamicsVariant::A, Rng::seeded(7));
  Video c = image_to_video(img, 6, DynamicsVariant::A, Rng::seeded(8));
  for (int k = 0; k < 6; ++k) CHECK((a[k].pix == b[k].pix).all());
  bool any_diff = false;
  for (int k = 0; k < 6; ++k) any_diff = any_diff || (a[k].pix != c[k].pix).any();
  CHECK(any_diff);
}

TEST_CASE("the object never fully leaves the frame") {
  // speed is capped by the available margin plus exit slack
  Frame img = render(disc_at(0.7, 0.5, 0.15));
  DynamicsParams params;
  params.frames = 12;
  Video v = image_to_video(img, 12, DynamicsVariant::A, Rng::seeded(9), params);
  // some mass must remain visible in every frame
  for (const Frame& f : v) CHECK(f.pix.sum() > 1.0);
}

TEST_CASE("dynamics params json and validation") {
  DynamicsParams p;
  p.speed_a = 2.0;
  p.jitter_sigma = 0.01;
  DynamicsParams r = DynamicsParams::from_json(p.to_json());
  CHECK(r.speed_a == 2.0);
  CHECK(r.jitter_sigma == 0.01);
  CHECK_THROWS(DynamicsParams::from_json({{"frames", 1}}));
  CHECK_THROWS(DynamicsParams::from_json({{"speed_a", -1.0}}));
}
