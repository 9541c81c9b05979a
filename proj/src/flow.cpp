#include "motionguide/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mg {

void FlowParams::validate() const {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("FlowParams: window must be odd and >= 3");
  if (!(tau > 0.0)) throw std::invalid_argument("FlowParams: tau must be > 0");
  if (!(max_flow > 0.0)) throw std::invalid_argument("FlowParams: max_flow must be > 0");
}

nlohmann::json FlowParams::to_json() const {
  return {{"window", window}, {"tau", tau}, {"max_flow", max_flow}, {"presmooth", presmooth}};
}

FlowParams FlowParams::from_json(const nlohmann::json& j) {
  FlowParams p;
  p.window = j.value("window", p.window);
  p.tau = j.value("tau", p.tau);
  p.max_flow = j.value("max_flow", p.max_flow);
  p.presmooth = j.value("presmooth", p.presmooth);
  p.validate();
  return p;
}

nlohmann::json FlowStats::to_json() const {
  return {{"mean_u", mean_u},     {"var_u", var_u},   {"mean_v", mean_v},
          {"var_v", var_v},       {"mean_mag", mean_mag}, {"var_mag", var_mag},
          {"n_valid", n_valid}};
}

FlowStats FlowStats::from_json(const nlohmann::json& j) {
  FlowStats s;
  s.mean_u = j.at("mean_u").get<double>();
  s.var_u = j.at("var_u").get<double>();
  s.mean_v = j.at("mean_v").get<double>();
  s.var_v = j.at("var_v").get<double>();
  s.mean_mag = j.at("mean_mag").get<double>();
  s.var_mag = j.at("var_mag").get<double>();
  s.n_valid = j.at("n_valid").get<long>();
  return s;
}

namespace {

const int N = Frame::kSize;

Eigen::ArrayXd binomial3(const Eigen::ArrayXd& img) {
  static const double w[3] = {0.25, 0.5, 0.25};
  Eigen::ArrayXd tmp(N * N), out(N * N);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = -1; k <= 1; ++k) acc += w[k + 1] * img[y * N + std::clamp(x + k, 0, N - 1)];
      tmp[y * N + x] = acc;
    }
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = -1; k <= 1; ++k) acc += w[k + 1] * tmp[std::clamp(y + k, 0, N - 1) * N + x];
      out[y * N + x] = acc;
    }
  return out;
}

// Box sums over window x window, truncated at the borders (no padding bias).
Eigen::ArrayXd box_sum(const Eigen::ArrayXd& img, int window) {
  const int r = window / 2;
  Eigen::ArrayXd tmp(N * N), out(N * N);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = std::max(0, x - r); k <= std::min(N - 1, x + r); ++k) acc += img[y * N + k];
      tmp[y * N + x] = acc;
    }
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      double acc = 0;
      for (int k = std::max(0, y - r); k <= std::min(N - 1, y + r); ++k) acc += tmp[k * N + x];
      out[y * N + x] = acc;
    }
  return out;
}

}  // namespace

FlowField lucas_kanade(const Frame& a, const Frame& b, const FlowParams& params) {
  params.validate();
  Eigen::ArrayXd fa = params.presmooth ? binomial3(a.pix) : a.pix;
  Eigen::ArrayXd fb = params.presmooth ? binomial3(b.pix) : b.pix;
  Eigen::ArrayXd avg = 0.5 * (fa + fb);

  // central differences with clamped indices; one-sided halves at the border
  Eigen::ArrayXd ix(N * N), iy(N * N);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      ix[y * N + x] = 0.5 * (avg[y * N + std::min(x + 1, N - 1)] -
                             avg[y * N + std::max(x - 1, 0)]);
      iy[y * N + x] = 0.5 * (avg[std::min(y + 1, N - 1) * N + x] -
                             avg[std::max(y - 1, 0) * N + x]);
    }
  Eigen::ArrayXd it = fb - fa;

  Eigen::ArrayXd sxx = box_sum(ix * ix, params.window);
  Eigen::ArrayXd sxy = box_sum(ix * iy, params.window);
  Eigen::ArrayXd syy = box_sum(iy * iy, params.window);
  Eigen::ArrayXd sxt = box_sum(ix * it, params.window);
  Eigen::ArrayXd syt = box_sum(iy * it, params.window);

  FlowField f;
  f.h = f.w = N;
  f.u = Eigen::ArrayXd::Zero(N * N);
  f.v = Eigen::ArrayXd::Zero(N * N);
  f.valid = Eigen::ArrayXd::Zero(N * N);
  for (int i = 0; i < N * N; ++i) {
    double tr = sxx[i] + syy[i];
    double disc = std::sqrt(std::max((sxx[i] - syy[i]) * (sxx[i] - syy[i]) +
                                         4.0 * sxy[i] * sxy[i],
                                     0.0));
    double eig_min = 0.5 * (tr - disc);
    if (eig_min <= params.tau) continue;
    double det = sxx[i] * syy[i] - sxy[i] * sxy[i];
    double u = (-syy[i] * sxt[i] + sxy[i] * syt[i]) / det;
    double v = (sxy[i] * sxt[i] - sxx[i] * syt[i]) / det;
    f.u[i] = std::clamp(u, -params.max_flow, params.max_flow);
    f.v[i] = std::clamp(v, -params.max_flow, params.max_flow);
    f.valid[i] = 1.0;
  }
  return f;
}

std::vector<FlowField> optical_flow(const Video& video, const FlowParams& params) {
  if (video.size() < 2)
    throw std::invalid_argument("optical_flow: need at least two frames");
  std::vector<FlowField> fields;
  fields.reserve(video.size() - 1);
  for (std::size_t i = 0; i + 1 < video.size(); ++i)
    fields.push_back(lucas_kanade(video[i], video[i + 1], params));
  return fields;
}

FlowStats flow_statistics(const std::vector<FlowField>& fields) {
  FlowStats s;
  double su = 0, sv = 0, sm = 0;
  for (const FlowField& f : fields) {
    s.n_valid += static_cast<long>(f.valid.sum());
    su += (f.valid * f.u).sum();
    sv += (f.valid * f.v).sum();
    sm += (f.valid * (f.u * f.u + f.v * f.v).sqrt()).sum();
  }
  if (s.n_valid == 0) return s;
  const double n = static_cast<double>(s.n_valid);
  s.mean_u = su / n;
  s.mean_v = sv / n;
  s.mean_mag = sm / n;
  double vu = 0, vv = 0, vm = 0;
  for (const FlowField& f : fields) {
    vu += (f.valid * (f.u - s.mean_u).square()).sum();
    vv += (f.valid * (f.v - s.mean_v).square()).sum();
    vm += (f.valid * ((f.u * f.u + f.v * f.v).sqrt() - s.mean_mag).square()).sum();
  }
  s.var_u = vu / n;
  s.var_v = vv / n;
  s.var_mag = vm / n;
  return s;
}

double mean_residual_magnitude(const std::vector<FlowField>& fields) {
  double total = 0;
  long n = 0;
  for (const FlowField& f : fields) {
    const double cells = static_cast<double>(f.h * f.w);
    if (cells == 0) continue;
    double mu = (f.valid * f.u).sum() / cells;
    double mv = (f.valid * f.v).sum() / cells;
    total += (f.valid * ((f.u - mu).square() + (f.v - mv).square()).sqrt()).sum();
    n += static_cast<long>(f.valid.sum());
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

}  // namespace mg
