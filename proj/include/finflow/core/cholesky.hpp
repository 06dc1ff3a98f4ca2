#pragma once

#include "finflow/core/check.hpp"

#include <vector>

namespace finflow {

// Dense Cholesky A = L L^T for the soft-body system matrix. DOF counts in
// this artifact stay in the low thousands, so dense is both simpler and
// faster than pulling in a sparse solver.
class Chol {
public:
    Chol() = default;

    static Chol factor(const std::vector<double>& a, int n);

    int dim() const { return n_; }

    // solve A x = b (b and x may alias)
    void solve(const double* b, double* x) const;

private:
    int n_ = 0;
    std::vector<double> l_; // row-major lower triangle (full n x n storage)
};

} // namespace finflow
