#include "finflow/couple/boundary.hpp"

namespace finflow::couple {

using namespace ad;
using fluid::MacGrid;

Tensor inside_delta(const Tensor& q_surf, const Tensor& centers) {
    const int k = q_surf.h(), m = centers.h();
    Tensor delta = Tensor::uninit({1, m, 1});
    double* o = delta.raw();
    const double* q = q_surf.data();
    const double* c = centers.data();
    for (int i = 0; i < m; ++i) {
        const double cx = c[2 * i], cy = c[2 * i + 1];
        int crossings = 0;
        for (int e = 0; e < k; ++e) {
            const int e1 = (e + 1) % k;
            const double x0 = q[2 * e], y0 = q[2 * e + 1];
            const double x1 = q[2 * e1], y1 = q[2 * e1 + 1];
            // half-open in y so rays grazing a vertex count once
            if ((y0 <= cy && cy < y1) || (y1 <= cy && cy < y0)) {
                double xi = x0 + (cy - y0) * (x1 - x0) / (y1 - y0);
                if (xi > cx) ++crossings;
            }
        }
        o[i] = (crossings % 2 == 1) ? 1.0 : -1.0;
    }
    return delta;
}

namespace {

struct MaskParts {
    DiffVar d2;     // (1,M,K) squared distances
    DiffVar b_col;  // (1,M,1) mask as a column
};

MaskParts mask_parts(Tape& t, const DiffVar& q_surf, const Tensor& centers, const SoftnessParams& sp) {
    DiffVar d2 = sqdist_points_rows(t, centers, q_surf);
    DiffVar w = softmin_rows(t, d2, sp.xi);
    DiffVar d2_soft = rowsum_w(t, mul(t, w, d2));
    Tensor delta = inside_delta(q_surf.val, centers);
    DiffVar signed_d2 = mul(t, d2_soft, constant(delta));
    DiffVar b_col = vsigmoid(t, scale(t, signed_d2, 1.0 / sp.sigma));
    return {d2, b_col};
}

} // namespace

DiffVar soft_boundary_mask(Tape& t, const DiffVar& q_surf, const Tensor& centers,
                           const MacGrid& grid, const SoftnessParams& sp) {
    sp.validate();
    MaskParts parts = mask_parts(t, q_surf, centers, sp);
    return reshape(t, parts.b_col, grid.cell_shape());
}

BoundaryVar boundary_condition(Tape& t, const DiffVar& q_surf, const DiffVar& qdot_surf,
                               const Tensor& centers, const MacGrid& grid, const SoftnessParams& sp) {
    sp.validate();
    const int k = q_surf.shape().h;
    check(qdot_surf.shape() == q_surf.shape(), "boundary_condition: q/qdot shape mismatch");

    MaskParts parts = mask_parts(t, q_surf, centers, sp);
    DiffVar wv = softmin_rows(t, parts.d2, sp.tau);

    DiffVar qdx = reshape(t, crop(t, qdot_surf, 0, 1, 0, k, 0, 1), {1, 1, k});
    DiffVar qdy = reshape(t, crop(t, qdot_surf, 0, 1, 0, k, 1, 1), {1, 1, k});
    // v_d = (softmin-weighted neighbour velocity) * b, cellwise
    DiffVar vdx_col = mul(t, rowsum_w(t, mul(t, wv, qdx)), parts.b_col);
    DiffVar vdy_col = mul(t, rowsum_w(t, mul(t, wv, qdy)), parts.b_col);

    BoundaryVar bc;
    bc.b = reshape(t, parts.b_col, grid.cell_shape());
    bc.vdx_c = reshape(t, vdx_col, grid.cell_shape());
    bc.vdy_c = reshape(t, vdy_col, grid.cell_shape());
    bc.vdx = center_to_facex(t, bc.vdx_c);
    bc.vdy = center_to_facey(t, bc.vdy_c);
    return bc;
}

} // namespace finflow::couple
