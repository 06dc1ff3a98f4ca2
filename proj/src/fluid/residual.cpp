#include "finflow/fluid/residual.hpp"

namespace finflow::fluid {

using namespace ad;

namespace {

struct Window {
    int j0, jn, i0, in;
};

DiffVar win(Tape& t, const DiffVar& f, const Window& w, int dj = 0, int di = 0) {
    return crop(t, f, 0, 1, w.j0 + dj, w.jn, w.i0 + di, w.in);
}

} // namespace

ResidualLoss ns_residual_loss(Tape& t, const FluidStateVar& s_t, const FluidStateVar& s_t1,
                              const couple::BoundaryVar& bc, const FluidParams& fp,
                              const MacGrid& grid) {
    fp.validate();
    check(s_t.a.shape() == grid.corner_shape() && s_t1.a.shape() == grid.corner_shape(),
          "ns_residual_loss: states must live on the same grid");
    check(bc.b.shape() == grid.cell_shape(), "ns_residual_loss: mask shape mismatch");
    const int nx = grid.nx, ny = grid.ny;
    const double h = grid.dt, dx = grid.dx;
    const double rs = fp.rescale_for(grid);

    VelocityVar v_t = velocity_from_curl(t, s_t.a, grid);
    VelocityVar v1 = velocity_from_curl(t, s_t1.a, grid);
    DiffVar bx = center_to_facex(t, bc.b);
    DiffVar by = center_to_facey(t, bc.b);

    // ---- x-momentum on interior x faces: j in [1,ny-1), i in [1,nx) ----
    Window wx{1, ny - 2, 1, nx - 1};
    DiffVar u = win(t, v1.vx, wx);
    DiffVar u_xp = win(t, v1.vx, wx, 0, 1), u_xm = win(t, v1.vx, wx, 0, -1);
    DiffVar u_yp = win(t, v1.vx, wx, 1, 0), u_ym = win(t, v1.vx, wx, -1, 0);
    DiffVar dudt = scale(t, sub(t, u, win(t, v_t.vx, wx)), 1.0 / h);
    DiffVar dudx = scale(t, sub(t, u_xp, u_xm), 1.0 / (2 * dx));
    DiffVar dudy = scale(t, sub(t, u_yp, u_ym), 1.0 / (2 * dx));
    // vy averaged to the x face: rows j,j+1 and cols i-1,i of vy
    DiffVar vbar = scale(
        t,
        add(t, add(t, crop(t, v1.vy, 0, 1, 1, ny - 2, 0, nx - 1), crop(t, v1.vy, 0, 1, 1, ny - 2, 1, nx - 1)),
            add(t, crop(t, v1.vy, 0, 1, 2, ny - 2, 0, nx - 1), crop(t, v1.vy, 0, 1, 2, ny - 2, 1, nx - 1))),
        0.25);
    DiffVar lap_u = scale(
        t, sub(t, add(t, add(t, u_xp, u_xm), add(t, u_yp, u_ym)), scale(t, u, 4.0)), 1.0 / (dx * dx));
    DiffVar dpdx = scale(t, sub(t, crop(t, s_t1.p, 0, 1, 1, ny - 2, 1, nx - 1),
                                crop(t, s_t1.p, 0, 1, 1, ny - 2, 0, nx - 1)),
                         1.0 / dx);
    DiffVar adv_u = add(t, mul(t, u, dudx), mul(t, vbar, dudy));
    DiffVar rx = scale(
        t, sub(t, add(t, scale(t, add(t, dudt, adv_u), fp.rho), dpdx), scale(t, lap_u, fp.mu)), rs);
    DiffVar wfx = sub(t, constant(1.0), win(t, bx, wx));

    // ---- y-momentum on interior y faces: j in [1,ny), i in [1,nx-1) ----
    Window wy{1, ny - 1, 1, nx - 2};
    DiffVar v = win(t, v1.vy, wy);
    DiffVar v_xp = win(t, v1.vy, wy, 0, 1), v_xm = win(t, v1.vy, wy, 0, -1);
    DiffVar v_yp = win(t, v1.vy, wy, 1, 0), v_ym = win(t, v1.vy, wy, -1, 0);
    DiffVar dvdt = scale(t, sub(t, v, win(t, v_t.vy, wy)), 1.0 / h);
    DiffVar dvdx = scale(t, sub(t, v_xp, v_xm), 1.0 / (2 * dx));
    DiffVar dvdy = scale(t, sub(t, v_yp, v_ym), 1.0 / (2 * dx));
    // vx averaged to the y face: rows j-1,j and cols i,i+1 of vx
    DiffVar ubar = scale(
        t,
        add(t, add(t, crop(t, v1.vx, 0, 1, 0, ny - 1, 1, nx - 2), crop(t, v1.vx, 0, 1, 0, ny - 1, 2, nx - 2)),
            add(t, crop(t, v1.vx, 0, 1, 1, ny - 1, 1, nx - 2), crop(t, v1.vx, 0, 1, 1, ny - 1, 2, nx - 2))),
        0.25);
    DiffVar lap_v = scale(
        t, sub(t, add(t, add(t, v_xp, v_xm), add(t, v_yp, v_ym)), scale(t, v, 4.0)), 1.0 / (dx * dx));
    DiffVar dpdy = scale(t, sub(t, crop(t, s_t1.p, 0, 1, 1, ny - 1, 1, nx - 2),
                                crop(t, s_t1.p, 0, 1, 0, ny - 1, 1, nx - 2)),
                         1.0 / dx);
    DiffVar adv_v = add(t, mul(t, ubar, dvdx), mul(t, v, dvdy));
    DiffVar ry = scale(
        t, sub(t, add(t, scale(t, add(t, dvdt, adv_v), fp.rho), dpdy), scale(t, lap_v, fp.mu)), rs);
    DiffVar wfy = sub(t, constant(1.0), win(t, by, wy));

    DiffVar lp_num = add(t, reduce_sum(t, mul(t, wfx, mul(t, rx, rx))),
                         reduce_sum(t, mul(t, wfy, mul(t, ry, ry))));
    DiffVar lp_den = add(t, add(t, reduce_sum(t, wfx), reduce_sum(t, wfy)), constant(1e-12));
    DiffVar lp = div(t, lp_num, lp_den);

    // ---- boundary-velocity mismatch on all faces, weighted by b ----
    DiffVar mx = scale(t, sub(t, v1.vx, bc.vdx), rs);
    DiffVar my = scale(t, sub(t, v1.vy, bc.vdy), rs);
    DiffVar lb_num = add(t, reduce_sum(t, mul(t, bx, mul(t, mx, mx))),
                         reduce_sum(t, mul(t, by, mul(t, my, my))));
    DiffVar lb_den = add(t, add(t, reduce_sum(t, bx), reduce_sum(t, by)), constant(1e-12));
    DiffVar lb = div(t, lb_num, lb_den);

    ResidualLoss out;
    out.lp = lp;
    out.lb = lb;
    out.total = add(t, scale(t, lp, fp.beta), scale(t, lb, fp.gamma_loss));
    return out;
}

} // namespace finflow::fluid
