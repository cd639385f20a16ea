#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

enum class PredictionMode { epsilon, v };

PredictionMode prediction_mode_from_name(const std::string& name);
const char* prediction_mode_name(PredictionMode m);

// Discrete diffusion noise schedule over timesteps t = 1..T.
//
// Betas follow the scaled-linear construction: sqrt(beta_t) is linear from
// sqrt(beta_start) to sqrt(beta_end), then squared. alpha_bar is the running
// product of (1 - beta_t). sqrt_alpha_bar is the primary stored quantity;
// the rescaled variant replaces it and rederives the rest.
struct Schedule {
    std::size_t T = 0;
    PredictionMode mode = PredictionMode::v;
    bool zero_snr = false;

    std::vector<double> beta;
    std::vector<double> sqrt_alpha_bar;
    std::vector<double> sqrt_one_minus_alpha_bar;

    double alpha_bar(std::size_t t) const;  // t in 1..T
    double sab(std::size_t t) const;        // sqrt(alpha_bar_t)
    double somab(std::size_t t) const;      // sqrt(1 - alpha_bar_t)
};

// Preconditions: T >= 1, 0 < beta_start <= beta_end < 1. When zero_snr is
// set the mode must be v (an epsilon target is undefined at zero SNR) and the
// terminal-SNR rescale is applied to the constructed schedule.
Schedule make_schedule(std::size_t T, double beta_start, double beta_end, PredictionMode mode,
                       bool zero_snr);

// Shifts and scales sqrt(alpha_bar) so the terminal step has exactly zero
// signal while the first step keeps its value (to within a rounding ulp):
//
//   s'_t = (s_t - s_T) * s_1 / (s_1 - s_T)
//
// Applying it twice is a no-op. Requires v mode.
Schedule rescale_zero_terminal_snr(const Schedule& s);

// z_t = sab(t) * z0 + somab(t) * eps
Tensor add_noise(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& s);

// Training target for the configured parameterization:
//   epsilon: eps
//   v:       sab(t) * eps - somab(t) * z0
Tensor prediction_target(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& s);

// Inverts the parameterization back to a clean-sample estimate:
//   epsilon: (z_t - somab(t) * pred) / sab(t)   (undefined when sab(t) == 0)
//   v:       sab(t) * z_t - somab(t) * pred
Tensor reconstruct_z0(const Tensor& z_t, const Tensor& pred, std::size_t t, const Schedule& s);

}  // namespace fusevid
