#pragma once

#include <Eigen/Core>
#include <vector>

#include "json.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

enum class Kind { disc, bar };

const char* kind_name(Kind k);
Kind kind_from_name(const std::string& name);

// Geometry in normalized [0,1] coordinates; a bar is a 2:1 axis-aligned
// rectangle with half-width `radius`. completeness < 1 clips the object with
// a hard vertical cut from the right. mobility encodes the intended border
// margin (margin_px = 8 * mobility); the renderer itself ignores it.
struct SceneSpec {
  Kind kind = Kind::disc;
  double cx = 0.5, cy = 0.5;
  double radius = 0.25;
  double completeness = 1.0;
  double mobility = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static SceneSpec from_json(const nlohmann::json& j);
};

struct Frame {
  static constexpr int kSize = 32;
  Eigen::ArrayXd pix = Eigen::ArrayXd::Zero(kSize * kSize);  // row-major, [0,1]

  double at(int y, int x) const { return pix[y * kSize + x]; }
  double& at(int y, int x) { return pix[y * kSize + x]; }
};

using Video = std::vector<Frame>;

// Anti-aliased rasterization (4x4 supersampling) onto a zero background.
// Rejects objects whose rendered mass is below one pixel.
Frame render(const SceneSpec& spec);

// What the downstream dynamics can see in pixels. Threshold at 0.5, largest
// 4-connected component.
struct Percept {
  bool has_object = false;
  Kind kind = Kind::disc;
  double cx = 0.0, cy = 0.0;     // normalized
  double radius = 0.0;           // normalized, from the bbox height
  double area_frac = 0.0;        // component pixels / total
  double completeness = 1.0;     // bbox width vs the width the height implies
  double mobility = 0.0;         // min border margin / 8 px, clamped to [0,1]
  bool border_contact = false;
  double elongation = 1.0;       // sqrt of principal variance ratio, >= 1
  long area_px = 0;
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // bbox, inclusive
};

Percept perceive(const Frame& frame);

// Pixel indices (y * kSize + x) of the component perceive() measures.
std::vector<int> largest_component_pixels(const Frame& frame);

Tensor frames_to_tensor(const std::vector<Frame>& frames);        // (N,1,32,32)
Tensor video_to_tensor(const Video& video);                       // (F,32,32)
Frame tensor_row_to_frame(const Tensor& t, long row);             // from (N,1,32,32)
Video tensor_to_video(const Tensor& t);                           // from (F,32,32)

}  // namespace mg
