#include "fusevid/grad_check.hpp"

#include <cmath>

#include "fusevid/errors.hpp"

namespace fusevid {

namespace {

double eval_scalar(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    Tensor y = f(x);
    if (y.numel() != 1) {
        throw ShapeError("grad_check: f must return a scalar, got shape " +
                         shape_to_string(y.shape()));
    }
    const double v = y.item();
    if (!std::isfinite(v)) throw EvalError("grad_check: f produced a non-finite value");
    return v;
}

}  // namespace

GradReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                      double eps, double atol) {
    if (x.dtype() != DType::f64) {
        throw PrecisionError("grad_check: input must be f64, got " +
                             std::string(dtype_name(x.dtype())));
    }
    if (eps <= 0.0) throw ParamError("grad_check: eps must be positive");
    if (atol < 0.0) throw ParamError("grad_check: atol must be non-negative");

    // Work on a private copy so the caller's tensor is untouched.
    Tensor probe = x.clone();
    probe.set_requires_grad(true);

    Tensor y = f(probe);
    if (y.numel() != 1) {
        throw ShapeError("grad_check: f must return a scalar, got shape " +
                         shape_to_string(y.shape()));
    }
    if (!std::isfinite(y.item())) throw EvalError("grad_check: f produced a non-finite value");
    if (!y.requires_grad()) {
        throw ParamError("grad_check: f's output does not depend on x through the graph");
    }
    probe.zero_grad();
    y.backward();

    std::vector<double> analytic(probe.numel());
    for (std::size_t i = 0; i < probe.numel(); ++i) analytic[i] = probe.grad_at(i);

    probe.set_requires_grad(false);
    GradReport report;
    for (std::size_t i = 0; i < probe.numel(); ++i) {
        const double saved = probe.value_at(i);
        probe.set_value_at(i, saved + eps);
        const double up = eval_scalar(f, probe);
        probe.set_value_at(i, saved - eps);
        const double down = eval_scalar(f, probe);
        probe.set_value_at(i, saved);

        const double numeric = (up - down) / (2.0 * eps);
        if (!std::isfinite(numeric)) throw EvalError("grad_check: non-finite finite difference");
        if (std::fabs(analytic[i]) <= atol && std::fabs(numeric) <= atol)
            continue;
        const double denom =
            std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(analytic[i] - numeric) / denom;
        if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

}  // namespace fusevid
