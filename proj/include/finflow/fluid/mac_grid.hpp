#pragma once

#include "finflow/ad/ops.hpp"
#include "finflow/core/tensor.hpp"

namespace finflow::fluid {

// Staggered MAC grid. Tensors are row-major (1, rows=y, cols=x):
//   cell centers   (1, ny,   nx  ) at ((i+.5)dx, (j+.5)dx)   - pressure, mask
//   corners        (1, ny+1, nx+1) at (i dx, j dx)           - curl a
//   x faces        (1, ny,   nx+1) at (i dx, (j+.5)dx)       - vx
//   y faces        (1, ny+1, nx  ) at ((i+.5)dx, j dx)       - vy
// The curl's outermost corner ring is pinned to zero, which closes the box
// walls exactly (no through-wall flow representable).
struct MacGrid {
    int nx = 300;
    int ny = 100;
    double dx = 2.5e-3; // m
    double dt = 0.01;   // s

    void validate() const {
        check(nx >= 8 && ny >= 8, "MacGrid: nx, ny must be >= 8");
        check(dx > 0.0 && dt > 0.0, "MacGrid: dx, dt must be positive");
    }

    double lx() const { return nx * dx; }
    double ly() const { return ny * dx; }

    Shape cell_shape() const { return {1, ny, nx}; }
    Shape corner_shape() const { return {1, ny + 1, nx + 1}; }
    Shape facex_shape() const { return {1, ny, nx + 1}; }
    Shape facey_shape() const { return {1, ny + 1, nx}; }
    Shape net_shape() const { return {1, ny, nx}; }

    // cell-center coordinates as an (ny*nx, 2) row-major point list
    Tensor cell_centers() const;
};

struct FluidStateVar {
    ad::DiffVar a; // curl on corners, m^2/s
    ad::DiffVar p; // pressure on cells, Pa
};

// v = curl(a): vx = da/dy, vy = -da/dx by forward differences; divergence of
// the result telescopes to zero identically
struct VelocityVar {
    ad::DiffVar vx, vy;
};
VelocityVar velocity_from_curl(ad::Tape& t, const ad::DiffVar& a, const MacGrid& grid);

// discrete divergence per cell (for tests/assertions)
Tensor divergence(const Tensor& vx, const Tensor& vy, const MacGrid& grid);

// curl <-> net-channel embedding: the (1,ny,nx) net plane carries corner
// values with row 0 / col 0 forced to zero; the implicit last row/col are
// zero as well (wall ring)
ad::DiffVar curl_to_net(ad::Tape& t, const ad::DiffVar& a_corner, const MacGrid& grid);
ad::DiffVar net_to_curl(ad::Tape& t, const ad::DiffVar& a_net, const MacGrid& grid);

} // namespace finflow::fluid
