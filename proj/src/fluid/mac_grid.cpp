#include "finflow/fluid/mac_grid.hpp"

namespace finflow::fluid {

using namespace ad;

Tensor MacGrid::cell_centers() const {
    Tensor pts = Tensor::uninit({1, ny * nx, 2});
    double* p = pts.raw();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            p[2 * (std::size_t(j) * nx + i)] = (i + 0.5) * dx;
            p[2 * (std::size_t(j) * nx + i) + 1] = (j + 0.5) * dx;
        }
    return pts;
}

VelocityVar velocity_from_curl(Tape& t, const DiffVar& a, const MacGrid& grid) {
    check(a.shape() == grid.corner_shape(),
          "velocity_from_curl: curl shape " + a.shape().str() + " does not match corner grid " +
              grid.corner_shape().str());
    const int nx = grid.nx, ny = grid.ny;
    const double inv_dx = 1.0 / grid.dx;
    // vx(j,i) = (a(j+1,i) - a(j,i)) / dx on x faces
    DiffVar upper = crop(t, a, 0, 1, 1, ny, 0, nx + 1);
    DiffVar lower = crop(t, a, 0, 1, 0, ny, 0, nx + 1);
    DiffVar vx = scale(t, sub(t, upper, lower), inv_dx);
    // vy(j,i) = -(a(j,i+1) - a(j,i)) / dx on y faces
    DiffVar right = crop(t, a, 0, 1, 0, ny + 1, 1, nx);
    DiffVar left = crop(t, a, 0, 1, 0, ny + 1, 0, nx);
    DiffVar vy = scale(t, sub(t, right, left), -inv_dx);
    return {vx, vy};
}

Tensor divergence(const Tensor& vx, const Tensor& vy, const MacGrid& grid) {
    check(vx.shape() == grid.facex_shape() && vy.shape() == grid.facey_shape(),
          "divergence: face shape mismatch");
    const int nx = grid.nx, ny = grid.ny;
    const double inv_dx = 1.0 / grid.dx;
    Tensor d = Tensor::uninit(grid.cell_shape());
    double* o = d.raw();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double dvx = vx.at(0, j, i + 1) - vx.at(0, j, i);
            double dvy = vy.at(0, j + 1, i) - vy.at(0, j, i);
            o[std::size_t(j) * nx + i] = (dvx + dvy) * inv_dx;
        }
    return d;
}

DiffVar curl_to_net(Tape& t, const DiffVar& a_corner, const MacGrid& grid) {
    check(a_corner.shape() == grid.corner_shape(), "curl_to_net: corner shape mismatch");
    return crop(t, a_corner, 0, 1, 0, grid.ny, 0, grid.nx);
}

DiffVar net_to_curl(Tape& t, const DiffVar& a_net, const MacGrid& grid) {
    check(a_net.shape() == grid.net_shape(), "net_to_curl: net plane shape mismatch");
    // zero the first row/col, then pad a zero last row/col: full wall ring
    static thread_local Tensor mask_cache;
    if (!(mask_cache.defined() && mask_cache.shape() == a_net.shape())) {
        mask_cache = Tensor::full(a_net.shape(), 1.0);
        double* m = mask_cache.raw();
        for (int i = 0; i < grid.nx; ++i) m[i] = 0.0;
        for (int j = 0; j < grid.ny; ++j) m[std::size_t(j) * grid.nx] = 0.0;
    }
    DiffVar masked = mul(t, a_net, constant(mask_cache));
    return pad2d(t, masked, 0, 1, 0, 1);
}

} // namespace finflow::fluid
