#include "fusevid/schedule.hpp"

#include <cmath>

#include "fusevid/errors.hpp"

namespace fusevid {

PredictionMode prediction_mode_from_name(const std::string& name) {
    if (name == "epsilon") return PredictionMode::epsilon;
    if (name == "v") return PredictionMode::v;
    throw ParamError("unknown prediction mode: " + name + " (expected epsilon or v)");
}

const char* prediction_mode_name(PredictionMode m) {
    return m == PredictionMode::epsilon ? "epsilon" : "v";
}

namespace {

void check_t(std::size_t t, const Schedule& s, const char* op) {
    if (t < 1 || t > s.T) {
        throw ParamError(std::string(op) + ": timestep " + std::to_string(t) +
                         " outside 1.." + std::to_string(s.T));
    }
}

}  // namespace

double Schedule::alpha_bar(std::size_t t) const {
    check_t(t, *this, "alpha_bar");
    return sqrt_alpha_bar[t - 1] * sqrt_alpha_bar[t - 1];
}

double Schedule::sab(std::size_t t) const {
    check_t(t, *this, "sab");
    return sqrt_alpha_bar[t - 1];
}

double Schedule::somab(std::size_t t) const {
    check_t(t, *this, "somab");
    return sqrt_one_minus_alpha_bar[t - 1];
}

Schedule make_schedule(std::size_t T, double beta_start, double beta_end, PredictionMode mode,
                       bool zero_snr) {
    if (T < 1) throw ParamError("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end)) {
        throw ParamError("make_schedule: need 0 < beta_start <= beta_end < 1, got " +
                         std::to_string(beta_start) + ".." + std::to_string(beta_end));
    }
    if (zero_snr && mode == PredictionMode::epsilon) {
        throw ParamError("make_schedule: zero terminal SNR requires v mode (epsilon target is "
                         "undefined at zero SNR)");
    }

    Schedule s;
    s.T = T;
    s.mode = mode;
    s.zero_snr = zero_snr;
    s.beta.resize(T);
    s.sqrt_alpha_bar.resize(T);
    s.sqrt_one_minus_alpha_bar.resize(T);

    const double sb0 = std::sqrt(beta_start);
    const double sb1 = std::sqrt(beta_end);
    double prod = 1.0;
    for (std::size_t i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
        const double sb = sb0 + frac * (sb1 - sb0);
        s.beta[i] = sb * sb;
        prod *= 1.0 - s.beta[i];
        s.sqrt_alpha_bar[i] = std::sqrt(prod);
        s.sqrt_one_minus_alpha_bar[i] = std::sqrt(1.0 - prod);
    }

    if (zero_snr) s = rescale_zero_terminal_snr(s);
    return s;
}

Schedule rescale_zero_terminal_snr(const Schedule& in) {
    if (in.mode != PredictionMode::v) {
        throw ParamError("rescale_zero_terminal_snr: requires v mode");
    }
    if (in.T < 2) throw ParamError("rescale_zero_terminal_snr: requires T >= 2");

    Schedule s = in;
    s.zero_snr = true;
    const double s1 = in.sqrt_alpha_bar.front();
    const double sT = in.sqrt_alpha_bar.back();
    if (!(s1 > sT)) {
        throw ParamError("rescale_zero_terminal_snr: schedule is not decreasing");
    }
    const double scale = s1 / (s1 - sT);
    for (std::size_t i = 0; i < s.T; ++i) {
        const double v = (in.sqrt_alpha_bar[i] - sT) * scale;
        s.sqrt_alpha_bar[i] = v;
        s.sqrt_one_minus_alpha_bar[i] = std::sqrt(1.0 - v * v);
    }
    return s;
}

namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype()) throw DtypeError(std::string(op) + ": mixed dtypes");
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

}  // namespace

Tensor add_noise(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& s) {
    check_t(t, s, "add_noise");
    check_pair(z0, eps, "add_noise");
    return add(scalar_mul(z0, s.sab(t)), scalar_mul(eps, s.somab(t)));
}

Tensor prediction_target(const Tensor& z0, const Tensor& eps, std::size_t t, const Schedule& s) {
    check_t(t, s, "prediction_target");
    check_pair(z0, eps, "prediction_target");
    if (s.mode == PredictionMode::epsilon) return eps;
    return sub(scalar_mul(eps, s.sab(t)), scalar_mul(z0, s.somab(t)));
}

Tensor reconstruct_z0(const Tensor& z_t, const Tensor& pred, std::size_t t, const Schedule& s) {
    check_t(t, s, "reconstruct_z0");
    check_pair(z_t, pred, "reconstruct_z0");
    if (s.mode == PredictionMode::epsilon) {
        const double sab = s.sab(t);
        if (sab == 0.0) {
            throw ParamError("reconstruct_z0: epsilon mode is singular at zero-signal step " +
                             std::to_string(t));
        }
        return scalar_mul(sub(z_t, scalar_mul(pred, s.somab(t))), 1.0 / sab);
    }
    return sub(scalar_mul(z_t, s.sab(t)), scalar_mul(pred, s.somab(t)));
}

}  // namespace fusevid
