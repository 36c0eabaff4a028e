#pragma once

#include <algorithm>
#include <cmath>

#include "tcwm/errors.hpp"

namespace tcwm {

template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss, std::span<const ParamRef> params, double h) {
    if (!(h > 0.0)) throw DomainError("grad_check: step h must be positive");
    GradCheckReport report;
    for (const auto& p : params) {
        const std::vector<Real> analytic(p.grad.begin(), p.grad.end());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const Real original = p.value[i];
            const Real plus = static_cast<Real>(original + h);
            const Real minus = static_cast<Real>(original - h);
            p.value[i] = plus;
            const double loss_plus = loss();
            p.value[i] = minus;
            const double loss_minus = loss();
            p.value[i] = original;
            if (!std::isfinite(loss_plus) || !std::isfinite(loss_minus)) {
                throw NumericError("grad_check: non-finite loss when perturbing " + p.name + "[" +
                                   std::to_string(i) + "]");
            }
            // Divide by the step actually taken after rounding to Real.
            const double step = static_cast<double>(plus) - static_cast<double>(minus);
            const double fd = (loss_plus - loss_minus) / step;
            const double a = analytic[i];
            const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
            if (report.checked == 0 || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = p.name;
                report.worst_index = i;
            }
            ++report.checked;
        }
    }
    return report;
}

}  // namespace tcwm
