#pragma once

#include "json.hpp"
#include "motionguide/rng.hpp"
#include "motionguide/scene.hpp"

namespace mg {

// The toy downstream video model. It sees the input only through perceive():
// a border-touching or low-margin object stays put (pixel jitter only), a
// perceived-incomplete object translates while shearing progressively, and a
// whole interior object translates with speed proportional to its mobility.
// Variant A prefers horizontal motion, variant B vertical at a lower speed;
// both share the same failure conditions.
enum class DynamicsVariant { A, B };

const char* variant_name(DynamicsVariant v);
DynamicsVariant variant_from_name(const std::string& name);

struct DynamicsParams {
  int frames = 8;
  double speed_a = 1.6;             // px/frame at mobility 1, primary axis
  double speed_b = 1.1;
  double mobility_floor = 0.15;
  double completeness_floor = 0.8;
  double shear_per_frame = 0.08;
  double jitter_sigma = 0.004;      // static-mode pixel noise
  double vel_noise = 0.05;          // px/frame velocity noise
  double exit_slack = 0.3;          // how far the object may cut the border, in radii

  void validate() const;
  static DynamicsParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Renders `frames` frames; the first is the input's largest component on a
// cleaned background. An empty frame yields exact copies of the input.
Video image_to_video(const Frame& image, int frames, DynamicsVariant variant, Rng rng,
                     const DynamicsParams& params = {});

// Mean per-frame centroid displacement in pixels over consecutive frames.
double mean_displacement(const Video& video);

}  // namespace mg
