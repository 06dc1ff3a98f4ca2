#include "finflow/core/cholesky.hpp"

#include "finflow/core/kernels.hpp"

#include <cmath>

namespace finflow {

Chol Chol::factor(const std::vector<double>& a, int n) {
    check(int(a.size()) == n * n, "Chol::factor: matrix size mismatch");
    Chol c;
    c.n_ = n;
    c.l_.assign(std::size_t(n) * n, 0.0);
    const auto& k = kern::ops();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[std::size_t(i) * n + j] -
                       k.dot(&c.l_[std::size_t(i) * n], &c.l_[std::size_t(j) * n], std::size_t(j));
            if (i == j) {
                check(s > 0.0, "Chol::factor: matrix not positive definite at pivot " + std::to_string(i));
                c.l_[std::size_t(i) * n + j] = std::sqrt(s);
            } else {
                c.l_[std::size_t(i) * n + j] = s / c.l_[std::size_t(j) * n + j];
            }
        }
    }
    return c;
}

void Chol::solve(const double* b, double* x) const {
    const int n = n_;
    const auto& k = kern::ops();
    std::vector<double> y(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = b[i] - k.dot(&l_[std::size_t(i) * n], y.data(), std::size_t(i));
        y[std::size_t(i)] = s / l_[std::size_t(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[std::size_t(i)];
        for (int j = i + 1; j < n; ++j) s -= l_[std::size_t(j) * n + i] * x[j];
        x[i] = s / l_[std::size_t(i) * n + i];
    }
}

} // namespace finflow
