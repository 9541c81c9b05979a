#pragma once

#include <vector>

#include "json.hpp"

namespace mg {

// Variance schedule for the forward corruption process. Construction computes
// the cumulative signal fraction alpha_bar by its product recurrence and
// rejects schedules whose endpoints leave either too little noise at t=0 or
// too much signal at t=T-1 for sampling to start from pure noise.
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int T, double beta_start, double beta_end);

  // 200-step schedule sized for the 32x32 toy model. beta_end is chosen so
  // the terminal signal fraction drops below 0.05.
  static NoiseSchedule defaults() { return linear(200, 1e-4, 0.032); }

  // 1000-step schedule matching common large-model settings.
  static NoiseSchedule fine() { return linear(1000, 1e-4, 0.02); }

  int T() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  double sqrt_alpha_bar(int t) const;
  double sqrt_one_minus_alpha_bar(int t) const;

  static NoiseSchedule from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  NoiseSchedule(std::vector<double> beta, std::vector<double> alpha_bar)
      : beta_(std::move(beta)), alpha_bar_(std::move(alpha_bar)) {}
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

}  // namespace mg
