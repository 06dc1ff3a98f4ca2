#pragma once

#include "finflow/core/check.hpp"

#include <functional>

namespace finflow::ad {

struct FdReport {
    double value = 0.0; // loss at p
    double g_ad = 0.0;
    double g_fd = 0.0;
    double rel_err = 0.0; // |g_ad - g_fd| / max(|g_fd|, 1e-12)
};

// Central-difference validation of a reverse-mode gradient. `loss_value`
// evaluates the loss at a parameter value; `loss_grad` returns dL/dp from the
// tape. The baseline is evaluated twice: a mismatch means the loss is not
// deterministic and is a hard error, not something to average away.
FdReport finite_difference_check(const std::function<double(double)>& loss_value,
                                 const std::function<double(double)>& loss_grad, double p,
                                 double eps);

} // namespace finflow::ad
