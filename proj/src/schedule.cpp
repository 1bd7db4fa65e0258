#include "cameo/schedule.hpp"

namespace cameo {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
    throw std::invalid_argument("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(std::size_t(T) + 1, 0.0);
  s.alpha.assign(std::size_t(T) + 1, 1.0);
  s.alpha_bar.assign(std::size_t(T) + 1, 1.0);
  s.sigma.assign(std::size_t(T) + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double frac = (T == 1) ? 0.0 : double(t - 1) / double(T - 1);
    s.beta[std::size_t(t)] = beta_start + frac * (beta_end - beta_start);
    s.alpha[std::size_t(t)] = 1.0 - s.beta[std::size_t(t)];
    s.alpha_bar[std::size_t(t)] =
        s.alpha_bar[std::size_t(t) - 1] * s.alpha[std::size_t(t)];
    double ab = s.alpha_bar[std::size_t(t)];
    double ab_prev = s.alpha_bar[std::size_t(t) - 1];
    s.sigma[std::size_t(t)] =
        std::sqrt((1.0 - ab_prev) / (1.0 - ab) * s.beta[std::size_t(t)]);
  }
  return s;
}

}  // namespace cameo
