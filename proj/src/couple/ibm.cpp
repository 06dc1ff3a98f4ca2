#include "finflow/couple/ibm.hpp"

#include <string>

namespace finflow::couple {

using namespace ad;
using fluid::MacGrid;

DiffVar ibm_sample(Tape& t, const DiffVar& field_cells, const DiffVar& b_cells,
                   const SurfaceGeometryVar& geo, const Tensor& centers, double sigma_prime) {
    check(sigma_prime > 0.0, "ibm_sample: sigma' must be positive");
    const int k = geo.points.shape().h;
    const int m = centers.h();
    check(int(field_cells.val.size()) == m && int(b_cells.val.size()) == m,
          "ibm_sample: field/mask do not match the cell grid");

    DiffVar d2 = sqdist_rows_points(t, geo.points, centers); // (1,K,M)
    DiffVar e = vexp(t, scale(t, d2, -1.0 / (2.0 * sigma_prime)));
    DiffVar b_row = reshape(t, b_cells, {1, 1, m});
    DiffVar eb = mul(t, e, b_row); // h-broadcast
    DiffVar z = rowsum_w(t, eb);   // (1,K,1)
    for (int i = 0; i < k; ++i)
        if (z.val.data()[i] < 1e-30)
            throw SimError("ibm_sample: normalization underflow at surface element " +
                           std::to_string(i) + " (body left the masked grid region)");
    DiffVar field_row = reshape(t, field_cells, {1, 1, m});
    DiffVar num = rowsum_w(t, mul(t, eb, field_row));
    return div(t, num, z);
}

SurfaceForcesVar ibm_surface_forces(Tape& t, const DiffVar& p_cells, const DiffVar& b_cells,
                                    const SurfaceGeometryVar& geo, const Tensor& centers,
                                    double sigma_prime) {
    const int k = geo.points.shape().h;
    DiffVar p_k = ibm_sample(t, p_cells, b_cells, geo, centers, sigma_prime); // (1,K,1)
    DiffVar nx = crop(t, geo.normals, 0, 1, 0, k, 0, 1);
    DiffVar ny = crop(t, geo.normals, 0, 1, 0, k, 1, 1);
    DiffVar lp = neg(t, mul(t, geo.lengths, p_k));
    SurfaceForcesVar out;
    out.f_k = concat_w(t, mul(t, lp, nx), mul(t, lp, ny));
    out.f_total = reduce_rows_sum(t, out.f_k);
    return out;
}

DiffVar viscous_surface_forces(Tape& t, const DiffVar& a_corner, const DiffVar& b_cells,
                               const SurfaceGeometryVar& geo, const MacGrid& grid,
                               const Tensor& centers, double sigma_prime, double mu) {
    check(mu >= 0.0, "viscous_surface_forces: mu must be non-negative");
    const int k = geo.points.shape().h;
    const int nx_ = grid.nx, ny_ = grid.ny;
    // curl to cell centers: average of the four surrounding corners
    DiffVar c00 = crop(t, a_corner, 0, 1, 0, ny_, 0, nx_);
    DiffVar c01 = crop(t, a_corner, 0, 1, 0, ny_, 1, nx_);
    DiffVar c10 = crop(t, a_corner, 0, 1, 1, ny_, 0, nx_);
    DiffVar c11 = crop(t, a_corner, 0, 1, 1, ny_, 1, nx_);
    DiffVar a_cells = scale(t, add(t, add(t, c00, c01), add(t, c10, c11)), 0.25);

    DiffVar a_k = ibm_sample(t, a_cells, b_cells, geo, centers, sigma_prime); // (1,K,1)
    DiffVar nxc = crop(t, geo.normals, 0, 1, 0, k, 0, 1);
    DiffVar nyc = crop(t, geo.normals, 0, 1, 0, k, 1, 1);
    // f = -l mu a (n_y, -n_x): the 2D reduction of -l mu (n x a zhat)
    DiffVar la = scale(t, mul(t, geo.lengths, a_k), -mu);
    return concat_w(t, mul(t, la, nyc), neg(t, mul(t, la, nxc)));
}

DiffVar aggregate_average_force(Tape& t, const DiffVar& f_total, int n_nodes) {
    check(n_nodes > 0, "aggregate_average_force: node count must be positive");
    return broadcast_rows(t, scale(t, f_total, 1.0 / double(n_nodes)), n_nodes);
}

} // namespace finflow::couple
