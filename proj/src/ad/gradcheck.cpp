#include "finflow/ad/gradcheck.hpp"

#include <cmath>

namespace finflow::ad {

FdReport finite_difference_check(const std::function<double(double)>& loss_value,
                                 const std::function<double(double)>& loss_grad, double p,
                                 double eps) {
    check(eps > 0.0, "finite_difference_check: eps must be positive");
    const double f0 = loss_value(p);
    const double f0_again = loss_value(p);
    check(f0 == f0_again, "finite_difference_check: loss is not deterministic at the baseline");
    const double fp = loss_value(p + eps);
    const double fm = loss_value(p - eps);
    FdReport r;
    r.value = f0;
    r.g_fd = (fp - fm) / (2.0 * eps);
    r.g_ad = loss_grad(p);
    r.rel_err = std::fabs(r.g_ad - r.g_fd) / std::max(std::fabs(r.g_fd), 1e-12);
    return r;
}

} // namespace finflow::ad
