#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cameo {

// Index convention: t = 0 is clean data (alpha_bar[0] = 1); beta[0] = 0 is a
// placeholder so that beta[t] for t in [1, T] matches the usual schedule.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // T+1
  std::vector<double> alpha;      // T+1, 1 - beta
  std::vector<double> alpha_bar;  // T+1, strictly decreasing on [1, T]
  std::vector<double> sigma;      // T+1, DDPM posterior std

  static NoiseSchedule linear(int T, double beta_start = 1e-4,
                              double beta_end = 2e-2);
};

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps
template <typename T>
void forward_noise(const NoiseSchedule& sched, int t, const T* x0,
                   const T* eps, T* x_t, std::size_t n) {
  double a = sched.alpha_bar[std::size_t(t)];
  T sa = T(std::sqrt(a)), sb = T(std::sqrt(1.0 - a));
  for (std::size_t i = 0; i < n; ++i) x_t[i] = sa * x0[i] + sb * eps[i];
}

// x0_hat = (x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t); requires
// abar_t > 0.
template <typename T>
void predict_x0(const NoiseSchedule& sched, int t, const T* x_t,
                const T* eps_hat, T* x0_hat, std::size_t n) {
  double a = sched.alpha_bar[std::size_t(t)];
  if (!(a > 0.0))
    throw std::invalid_argument("predict_x0: alpha_bar must be > 0");
  T inv_sa = T(1.0 / std::sqrt(a)), sb = T(std::sqrt(1.0 - a));
  for (std::size_t i = 0; i < n; ++i)
    x0_hat[i] = (x_t[i] - sb * eps_hat[i]) * inv_sa;
}

// Deterministic update: x_{t_prev} = sqrt(abar_prev) * x0_hat +
// sqrt(1 - abar_prev) * eps_hat.
template <typename T>
void ddim_step(const NoiseSchedule& sched, int t, int t_prev, const T* x_t,
               const T* eps_hat, T* x_prev, std::size_t n) {
  if (t_prev >= t) throw std::invalid_argument("ddim_step: need t_prev < t");
  if (t < 1 || t > sched.T || t_prev < 0)
    throw std::out_of_range("ddim_step: step index out of range");
  double a_prev = sched.alpha_bar[std::size_t(t_prev)];
  T sa = T(std::sqrt(a_prev)), sb = T(std::sqrt(1.0 - a_prev));
  std::vector<T> x0_hat(n);
  predict_x0(sched, t, x_t, eps_hat, x0_hat.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    x_prev[i] = sa * x0_hat[i] + sb * eps_hat[i];
}

}  // namespace cameo
