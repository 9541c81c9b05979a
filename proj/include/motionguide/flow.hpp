#pragma once

#include <Eigen/Core>
#include <vector>

#include "json.hpp"
#include "motionguide/scene.hpp"

namespace mg {

// One dense flow field per consecutive frame pair. valid is 0/1; windows whose
// structure tensor is near-singular (aperture problem, flat patches) report
// zero flow with valid = 0 and are excluded from all pooled statistics.
struct FlowField {
  int h = 0, w = 0;
  Eigen::ArrayXd u, v, valid;  // row-major, h*w
};

struct FlowParams {
  int window = 5;           // odd, box sums truncated at borders
  double tau = 0.05;        // min eigenvalue of the structure tensor
  double max_flow = 3.0;    // per-component clamp, px/frame
  bool presmooth = true;    // 3x3 binomial on both frames first

  void validate() const;
  nlohmann::json to_json() const;
  static FlowParams from_json(const nlohmann::json& j);
};

// Population moments pooled over valid windows of every field. All zeros when
// nothing is valid.
struct FlowStats {
  double mean_u = 0, var_u = 0;
  double mean_v = 0, var_v = 0;
  double mean_mag = 0, var_mag = 0;
  long n_valid = 0;

  nlohmann::json to_json() const;
  static FlowStats from_json(const nlohmann::json& j);
};

FlowField lucas_kanade(const Frame& a, const Frame& b, const FlowParams& params = {});

// Fields for all consecutive pairs; rejects videos shorter than two frames.
std::vector<FlowField> optical_flow(const Video& video, const FlowParams& params = {});

FlowStats flow_statistics(const std::vector<FlowField>& fields);

// Mean |flow - per-field spatial mean| over valid windows. The spatial mean is
// taken over the full grid with invalid windows counted as zero, so coherent
// whole-frame drift cancels but localized object motion survives.
double mean_residual_magnitude(const std::vector<FlowField>& fields);

}  // namespace mg
