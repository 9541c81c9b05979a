#include "motionguide/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mg {

const char* variant_name(DynamicsVariant v) { return v == DynamicsVariant::A ? "A" : "B"; }

DynamicsVariant variant_from_name(const std::string& name) {
  if (name == "A" || name == "a") return DynamicsVariant::A;
  if (name == "B" || name == "b") return DynamicsVariant::B;
  throw std::invalid_argument("unknown dynamics variant '" + name + "'");
}

void DynamicsParams::validate() const {
  if (frames < 2) throw std::invalid_argument("DynamicsParams: frames must be >= 2");
  if (!(speed_a > 0.0 && speed_b > 0.0))
    throw std::invalid_argument("DynamicsParams: speeds must be > 0");
  if (!(mobility_floor >= 0.0 && mobility_floor <= 1.0))
    throw std::invalid_argument("DynamicsParams: mobility_floor must lie in [0,1]");
  if (!(completeness_floor >= 0.0 && completeness_floor <= 1.0))
    throw std::invalid_argument("DynamicsParams: completeness_floor must lie in [0,1]");
  if (jitter_sigma < 0.0 || vel_noise < 0.0 || shear_per_frame < 0.0 || exit_slack < 0.0)
    throw std::invalid_argument("DynamicsParams: noise and shear terms must be >= 0");
}

DynamicsParams DynamicsParams::from_json(const nlohmann::json& j) {
  DynamicsParams p;
  p.frames = j.value("frames", p.frames);
  p.speed_a = j.value("speed_a", p.speed_a);
  p.speed_b = j.value("speed_b", p.speed_b);
  p.mobility_floor = j.value("mobility_floor", p.mobility_floor);
  p.completeness_floor = j.value("completeness_floor", p.completeness_floor);
  p.shear_per_frame = j.value("shear_per_frame", p.shear_per_frame);
  p.jitter_sigma = j.value("jitter_sigma", p.jitter_sigma);
  p.vel_noise = j.value("vel_noise", p.vel_noise);
  p.exit_slack = j.value("exit_slack", p.exit_slack);
  p.validate();
  return p;
}

nlohmann::json DynamicsParams::to_json() const {
  return {{"frames", frames},
          {"speed_a", speed_a},
          {"speed_b", speed_b},
          {"mobility_floor", mobility_floor},
          {"completeness_floor", completeness_floor},
          {"shear_per_frame", shear_per_frame},
          {"jitter_sigma", jitter_sigma},
          {"vel_noise", vel_noise},
          {"exit_slack", exit_slack}};
}

namespace {

const int N = Frame::kSize;

// Largest-component soft mask: hard membership blurred with a 3x3 binomial
// kernel, so the extracted object keeps anti-aliased edges.
Eigen::ArrayXd soft_mask(const Frame& f) {
  Eigen::ArrayXd hard = Eigen::ArrayXd::Zero(N * N);
  for (int idx : largest_component_pixels(f)) hard[idx] = 1.0;
  // 3x3 binomial blur, replicate edges
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(N * N);
  static const double w[3] = {0.25, 0.5, 0.25};
  Eigen::ArrayXd tmp = Eigen::ArrayXd::Zero(N * N);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = -1; k <= 1; ++k) {
        int xx = std::clamp(x + k, 0, N - 1);
        acc += w[k + 1] * hard[y * N + xx];
      }
      tmp[y * N + x] = acc;
    }
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = -1; k <= 1; ++k) {
        int yy = std::clamp(y + k, 0, N - 1);
        acc += w[k + 1] * tmp[yy * N + x];
      }
      out[y * N + x] = acc;
    }
  return out;
}

double bilinear(const Eigen::ArrayXd& img, double y, double x) {
  if (y <= -1.0 || y >= N || x <= -1.0 || x >= N) return 0.0;
  int y0 = static_cast<int>(std::floor(y));
  int x0 = static_cast<int>(std::floor(x));
  double fy = y - y0, fx = x - x0;
  auto px = [&img](int yy, int xx) {
    if (yy < 0 || yy >= N || xx < 0 || xx >= N) return 0.0;
    return img[yy * N + xx];
  };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
         fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

// Inverse-mapped warp: shear about the centroid, then translate.
Frame warp(const Eigen::ArrayXd& base, double off_x, double off_y, double shear, double cx,
           double cy) {
  Frame out;
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double sx = x - off_x, sy = y - off_y;
      double src_x = shear != 0.0 ? cx + (sx - cx) - shear * (sy - cy) : sx;
      out.at(y, x) = std::clamp(bilinear(base, sy, src_x), 0.0, 1.0);
    }
  return out;
}

}  // namespace

Video image_to_video(const Frame& image, int frames, DynamicsVariant variant, Rng rng,
                     const DynamicsParams& params) {
  params.validate();
  if (frames < 2) throw std::invalid_argument("image_to_video: frames must be >= 2");

  Percept p = perceive(image);
  Video video;
  video.reserve(static_cast<std::size_t>(frames));
  if (!p.has_object) {
    for (int k = 0; k < frames; ++k) video.push_back(image);
    return video;
  }

  Eigen::ArrayXd mask = soft_mask(image);
  Frame base;
  base.pix = (image.pix * mask).min(1.0).max(0.0);
  video.push_back(base);

  const bool is_static = p.border_contact || p.mobility < params.mobility_floor;
  const bool distorts = !is_static && p.completeness < params.completeness_floor;

  if (is_static) {
    for (int k = 1; k < frames; ++k) {
      Frame f;
      f.pix = base.pix;
      for (int i = 0; i < N * N; ++i) f.pix[i] += rng.normal(0.0, params.jitter_sigma);
      f.pix = f.pix.min(1.0).max(0.0);
      video.push_back(f);
    }
    return video;
  }

  // Translation setup: move along the preferred axis toward the larger margin,
  // capped so the object exits the frame by at most exit_slack of its radius.
  const bool horizontal = variant == DynamicsVariant::A;
  const double speed_const = horizontal ? params.speed_a : params.speed_b;
  double margin_lo, margin_hi, half_extent;
  if (horizontal) {
    margin_lo = p.x0;
    margin_hi = N - 1 - p.x1;
    half_extent = 0.5 * (p.x1 - p.x0 + 1);
  } else {
    margin_lo = p.y0;
    margin_hi = N - 1 - p.y1;
    half_extent = 0.5 * (p.y1 - p.y0 + 1);
  }
  const double dir = margin_hi >= margin_lo ? 1.0 : -1.0;
  const double room = std::max(margin_lo, margin_hi) + params.exit_slack * half_extent;
  const double speed =
      std::min(speed_const * p.mobility, room / static_cast<double>(frames - 1));

  const double cx_px = p.cx * N - 0.5;
  const double cy_px = p.cy * N - 0.5;
  double off_x = 0.0, off_y = 0.0;
  for (int k = 1; k < frames; ++k) {
    double v_primary = dir * speed + rng.normal(0.0, params.vel_noise);
    double v_secondary = rng.normal(0.0, 0.5 * params.vel_noise);
    off_x += horizontal ? v_primary : v_secondary;
    off_y += horizontal ? v_secondary : v_primary;
    double shear = distorts ? params.shear_per_frame * k : 0.0;
    video.push_back(warp(base.pix, off_x, off_y, shear, cx_px, cy_px));
  }
  return video;
}

double mean_displacement(const Video& video) {
  if (video.size() < 2) throw std::invalid_argument("mean_displacement: need >= 2 frames");
  double total = 0.0;
  long pairs = 0;
  bool have_prev = false;
  double px = 0, py = 0;
  for (const Frame& f : video) {
    Percept p = perceive(f);
    if (!p.has_object) {
      have_prev = false;
      continue;
    }
    double x = p.cx * N, y = p.cy * N;
    if (have_prev) {
      total += std::hypot(x - px, y - py);
      ++pairs;
    }
    px = x;
    py = y;
    have_prev = true;
  }
  return pairs > 0 ? total / static_cast<double>(pairs) : 0.0;
}

}  // namespace mg
