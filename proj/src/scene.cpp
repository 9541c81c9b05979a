#include "motionguide/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mg {

const char* kind_name(Kind k) { return k == Kind::disc ? "disc" : "bar"; }

Kind kind_from_name(const std::string& name) {
  if (name == "disc") return Kind::disc;
  if (name == "bar") return Kind::bar;
  throw std::invalid_argument("unknown object kind '" + name + "'");
}

void SceneSpec::validate() const {
  if (!(cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0))
    throw std::invalid_argument("SceneSpec: center must lie in [0,1]^2");
  if (!(radius > 0.0 && radius <= 0.5))
    throw std::invalid_argument("SceneSpec: radius must lie in (0, 0.5]");
  if (!(completeness > 0.0 && completeness <= 1.0))
    throw std::invalid_argument("SceneSpec: completeness must lie in (0, 1]");
  if (!(mobility >= 0.0 && mobility <= 1.0))
    throw std::invalid_argument("SceneSpec: mobility must lie in [0, 1]");
}

nlohmann::json SceneSpec::to_json() const {
  return {{"kind", kind_name(kind)}, {"cx", cx},
          {"cy", cy},               {"radius", radius},
          {"completeness", completeness}, {"mobility", mobility}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.kind = kind_from_name(j.value("kind", "disc"));
  s.cx = j.value("cx", 0.5);
  s.cy = j.value("cy", 0.5);
  s.radius = j.value("radius", 0.25);
  s.completeness = j.value("completeness", 1.0);
  s.mobility = j.value("mobility", 1.0);
  s.validate();
  return s;
}

Frame render(const SceneSpec& spec) {
  spec.validate();
  const int N = Frame::kSize;
  const int ss = 4;  // subsamples per axis
  const double inv = 1.0 / N;
  const double cut_x = (spec.cx - spec.radius) + spec.completeness * 2.0 * spec.radius;
  Frame f;
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      int hit = 0;
      for (int sy = 0; sy < ss; ++sy) {
        double py = (y + (sy + 0.5) / ss) * inv;
        for (int sx = 0; sx < ss; ++sx) {
          double px = (x + (sx + 0.5) / ss) * inv;
          if (px > cut_x) continue;
          double dx = px - spec.cx, dy = py - spec.cy;
          bool inside = spec.kind == Kind::disc
                            ? dx * dx + dy * dy <= spec.radius * spec.radius
                            : std::abs(dx) <= spec.radius && std::abs(dy) <= spec.radius * 0.5;
          if (inside) ++hit;
        }
      }
      f.at(y, x) = static_cast<double>(hit) / (ss * ss);
    }
  }
  if (f.pix.sum() < 1.0)
    throw std::invalid_argument("render: object covers less than one pixel");
  return f;
}

namespace {

// Largest 4-connected component of pix > 0.5; pixel indices returned.
std::vector<int> largest_component(const Frame& f) {
  const int N = Frame::kSize;
  std::vector<int> comp_id(N * N, -1);
  std::vector<int> best;
  std::vector<int> stack;
  int next_id = 0;
  for (int start = 0; start < N * N; ++start) {
    if (f.pix[start] <= 0.5 || comp_id[start] != -1) continue;
    std::vector<int> members;
    stack.push_back(start);
    comp_id[start] = next_id;
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      members.push_back(p);
      int y = p / N, x = p % N;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= N || nx[k] < 0 || nx[k] >= N) continue;
        int q = ny[k] * N + nx[k];
        if (f.pix[q] > 0.5 && comp_id[q] == -1) {
          comp_id[q] = next_id;
          stack.push_back(q);
        }
      }
    }
    if (members.size() > best.size()) best = std::move(members);
    ++next_id;
  }
  return best;
}

}  // namespace

std::vector<int> largest_component_pixels(const Frame& frame) {
  return largest_component(frame);
}

Percept perceive(const Frame& frame) {
  const int N = Frame::kSize;
  Percept p;
  std::vector<int> comp = largest_component(frame);
  if (comp.empty()) return p;

  p.has_object = true;
  p.area_px = static_cast<long>(comp.size());
  p.area_frac = static_cast<double>(comp.size()) / (N * N);

  double sx = 0, sy = 0;
  int y0 = N, x0 = N, y1 = -1, x1 = -1;
  for (int idx : comp) {
    int y = idx / N, x = idx % N;
    sx += x;
    sy += y;
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
  }
  const double n = static_cast<double>(comp.size());
  const double mx = sx / n, my = sy / n;
  p.cx = (mx + 0.5) / N;
  p.cy = (my + 0.5) / N;
  p.y0 = y0;
  p.x0 = x0;
  p.y1 = y1;
  p.x1 = x1;

  double vxx = 0, vyy = 0, vxy = 0;
  for (int idx : comp) {
    double dy = idx / N - my, dx = idx % N - mx;
    vxx += dx * dx;
    vyy += dy * dy;
    vxy += dx * dy;
  }
  vxx /= n;
  vyy /= n;
  vxy /= n;
  double tr = vxx + vyy;
  double det_root = std::sqrt(std::max((vxx - vyy) * (vxx - vyy) + 4.0 * vxy * vxy, 0.0));
  double lam1 = 0.5 * (tr + det_root);
  double lam2 = 0.5 * (tr - det_root);
  p.elongation = lam2 > 1e-6 ? std::sqrt(lam1 / lam2) : 10.0;
  p.elongation = std::min(p.elongation, 10.0);
  p.kind = p.elongation > 1.5 ? Kind::bar : Kind::disc;

  const double width = x1 - x0 + 1;
  const double height = y1 - y0 + 1;
  p.radius = p.kind == Kind::disc ? height / (2.0 * N) : height / N;
  double expected_width = (p.kind == Kind::disc ? 1.0 : 2.0) * height;
  p.completeness = std::clamp(width / expected_width, 0.0, 1.0);

  int margin = std::min({y0, x0, N - 1 - y1, N - 1 - x1});
  p.border_contact = margin == 0;
  p.mobility = std::clamp(static_cast<double>(margin) / 8.0, 0.0, 1.0);
  return p;
}

Tensor frames_to_tensor(const std::vector<Frame>& frames) {
  const long n = static_cast<long>(frames.size());
  const long per = Frame::kSize * Frame::kSize;
  Tensor t = Tensor::zeros({n, 1, Frame::kSize, Frame::kSize});
  for (long i = 0; i < n; ++i)
    t.array().segment(i * per, per) = frames[static_cast<std::size_t>(i)].pix;
  return t;
}

Tensor video_to_tensor(const Video& video) {
  const long n = static_cast<long>(video.size());
  const long per = Frame::kSize * Frame::kSize;
  Tensor t = Tensor::zeros({n, Frame::kSize, Frame::kSize});
  for (long i = 0; i < n; ++i)
    t.array().segment(i * per, per) = video[static_cast<std::size_t>(i)].pix;
  return t;
}

Frame tensor_row_to_frame(const Tensor& t, long row) {
  const long per = Frame::kSize * Frame::kSize;
  if (t.size() % per != 0 || row < 0 || (row + 1) * per > t.size())
    throw std::invalid_argument("tensor_row_to_frame: row " + std::to_string(row) +
                                " out of range for " + shape_str(t.shape()));
  Frame f;
  f.pix = t.array().segment(row * per, per);
  return f;
}

Video tensor_to_video(const Tensor& t) {
  if (t.rank() != 3 || t.dim(1) != Frame::kSize || t.dim(2) != Frame::kSize)
    throw std::invalid_argument("tensor_to_video: expected (F,32,32), got " +
                                shape_str(t.shape()));
  Video v;
  for (long i = 0; i < t.dim(0); ++i) v.push_back(tensor_row_to_frame(t, i));
  return v;
}

}  // namespace mg
