#include "motionguide/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mg {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("NoiseSchedule: T must be >= 2, got " + std::to_string(T));
  if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0))
    throw std::invalid_argument("NoiseSchedule: beta must lie in (0,1)");
  if (beta_end < beta_start)
    throw std::invalid_argument("NoiseSchedule: beta_end must be >= beta_start");

  std::vector<double> beta(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    beta[static_cast<std::size_t>(t)] =
        beta_start + (beta_end - beta_start) * static_cast<double>(t) / (T - 1);

  std::vector<double> alpha_bar(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    prod *= 1.0 - beta[static_cast<std::size_t>(t)];
    alpha_bar[static_cast<std::size_t>(t)] = prod;
  }

  if (!(alpha_bar.front() > 0.99))
    throw std::invalid_argument("NoiseSchedule: first-step signal fraction " +
                                std::to_string(alpha_bar.front()) + " must exceed 0.99");
  if (!(alpha_bar.back() < 0.05))
    throw std::invalid_argument("NoiseSchedule: terminal signal fraction " +
                                std::to_string(alpha_bar.back()) +
                                " must drop below 0.05; raise beta_end or T");
  return NoiseSchedule(std::move(beta), std::move(alpha_bar));
}

double NoiseSchedule::sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar(t)); }

double NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
  return std::sqrt(1.0 - alpha_bar(t));
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  return linear(j.value("T", 200), j.value("beta_start", 1e-4), j.value("beta_end", 0.032));
}

nlohmann::json NoiseSchedule::to_json() const {
  return {{"T", T()}, {"beta_start", beta_.front()}, {"beta_end", beta_.back()}};
}

}  // namespace mg
