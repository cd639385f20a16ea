#pragma once

#include <functional>

#include "fusevid/tensor.hpp"

namespace fusevid {

struct GradReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Compares reverse-mode gradients of f against central finite differences.
//
// f must map an f64 tensor to an f64 scalar and be deterministic. For each
// coordinate i the numeric gradient is (f(x + eps*e_i) - f(x - eps*e_i)) / 2eps
// and the relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
// Coordinates where both gradients fall below atol count as exact: a true
// zero gradient leaves only rounding noise in the central difference, which
// would otherwise dominate the relative error.
//
// Throws PrecisionError when x is not f64 and EvalError when f produces a
// non-finite value. x itself is never modified; probing happens on a copy.
GradReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                      double eps = 1e-5, double atol = 1e-7);

}  // namespace fusevid
