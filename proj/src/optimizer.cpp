#include "fusevid/optimizer.hpp"

#include <cmath>

#include "fusevid/errors.hpp"

namespace fusevid {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : cfg_(cfg), params_(std::move(params)) {
    if (cfg_.lr <= 0.0) throw ParamError("adam: lr must be positive");
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 ||
        cfg_.beta2 >= 1.0)
        throw ParamError("adam: betas must lie in [0, 1)");
    if (cfg_.eps <= 0.0) throw ParamError("adam: eps must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 =
        1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 =
        1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        const bool has = p.has_grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const double g = has ? p.grad_at(j) : 0.0;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            const double delta = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            p.set_value_at(j, p.value_at(j) - delta);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

double Adam::grad_norm() const {
    double acc = 0.0;
    for (const auto& p : params_) {
        if (!p.has_grad()) continue;
        for (std::size_t j = 0; j < p.numel(); ++j) {
            const double g = p.grad_at(j);
            acc += g * g;
        }
    }
    return std::sqrt(acc);
}

}  // namespace fusevid
