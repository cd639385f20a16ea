#pragma once

#include <cstddef>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second-moment adaptive optimizer over a fixed parameter list.
//
// Update rule, applied per coordinate with gradient g at step n (1-based):
//   m <- beta1 * m + (1 - beta1) * g
//   v <- beta2 * v + (1 - beta2) * g^2
//   p <- p - lr * (m / (1 - beta1^n)) / (sqrt(v / (1 - beta2^n)) + eps)
//
// Moments are kept in double regardless of the parameter dtype, and the
// update loop is serial, so results do not depend on thread count.
// Parameters that received no gradient this step use g = 0.
class Adam {
  public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    // Applies one update from the gradients currently on the parameters.
    void step();
    // Clears every parameter's gradient.
    void zero_grad();
    // L2 norm over all current gradients (missing gradients count as 0).
    double grad_norm() const;

    std::size_t steps() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    // Lets a schedule adjust the step size between updates.
    void set_lr(double lr) { cfg_.lr = lr; }

  private:
    AdamConfig cfg_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t step_count_ = 0;
};

}  // namespace fusevid
