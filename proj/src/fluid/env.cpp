#include "finflow/fluid/env.hpp"

#include "finflow/core/rng.hpp"
#include "finflow/swim/swimmer.hpp"

#include <cmath>

namespace finflow::fluid {

using namespace ad;

namespace {

Tensor ellipse_poly(double ra, double rb, int k = 32) {
    Tensor poly = Tensor::uninit({1, k, 2});
    for (int i = 0; i < k; ++i) {
        double phi = 2.0 * M_PI * i / k;
        poly.raw()[2 * i] = ra * std::cos(phi);
        poly.raw()[2 * i + 1] = rb * std::sin(phi);
    }
    return poly;
}

Tensor swimmer_poly(double length) {
    swim::SwimmerSpec spec;
    spec.length = length;
    spec.res_x = 16;
    spec.res_y = 4;
    solid::Mesh mesh = swim::build_profile_mesh(spec);
    const int k = int(mesh.surface.size());
    Tensor poly = Tensor::uninit({1, k, 2});
    double cx = 0, cy = 0;
    for (int i = 0; i < k; ++i) {
        cx += mesh.rest.data()[2 * mesh.surface[std::size_t(i)]];
        cy += mesh.rest.data()[2 * mesh.surface[std::size_t(i)] + 1];
    }
    cx /= k;
    cy /= k;
    for (int i = 0; i < k; ++i) {
        poly.raw()[2 * i] = mesh.rest.data()[2 * mesh.surface[std::size_t(i)]] - cx;
        poly.raw()[2 * i + 1] = mesh.rest.data()[2 * mesh.surface[std::size_t(i)] + 1] - cy;
    }
    return poly;
}

} // namespace

TrainingEnv::TrainingEnv(std::uint64_t seed, const MacGrid& grid, const EnvOptions& opt)
    : grid_(grid), opt_(opt), centers_(grid.cell_centers()) {
    grid.validate();
    Rng rng(seed ^ 0x5eed5eedULL);
    const double span = std::min(grid.lx(), grid.ly());

    belt_speed_ = rng.uniform() < 0.5 ? 0.0 : rng.uniform(opt.speed_lo, opt.speed_hi);

    const int n_obs = rng.uniform_int(1, 3);
    for (int o = 0; o < n_obs; ++o) {
        Obstacle ob;
        double extent;
        // resolvability floor: bodies span at least ~3 cells
        const double r_min = 3.0 * grid_.dx;
        if (rng.uniform() < 0.7) {
            double ra = std::max(rng.uniform(0.05, 0.12) * span, r_min);
            double rb = std::max(rng.uniform(0.05, 0.12) * span, r_min);
            ob.shape = ellipse_poly(ra, rb);
            extent = std::max(ra, rb);
        } else {
            double length = std::max(rng.uniform(0.25, 0.45) * span, 2.5 * r_min);
            ob.shape = swimmer_poly(length);
            extent = 0.6 * length;
        }
        const double speed = rng.uniform(opt.speed_lo, opt.speed_hi);
        // sinusoidal drift; amplitude capped so the body stays inside with margin
        ob.om_x = rng.uniform(0.5, 3.0);
        ob.om_y = rng.uniform(0.5, 3.0);
        ob.amp_x = speed / ob.om_x;
        ob.amp_y = (speed * rng.uniform(0.2, 1.0)) / ob.om_y;
        const double margin = extent + 2.0 * grid_.dx;
        check(2.0 * margin < std::min(grid_.lx(), grid_.ly()),
              "TrainingEnv: grid too small to hold a resolvable obstacle");
        ob.amp_x = std::min(ob.amp_x, 0.5 * (grid_.lx() - 2 * margin));
        ob.amp_y = std::min(ob.amp_y, 0.5 * (grid_.ly() - 2 * margin));
        ob.amp_x = std::max(ob.amp_x, 0.0);
        ob.amp_y = std::max(ob.amp_y, 0.0);
        ob.cx = rng.uniform(margin + ob.amp_x, grid_.lx() - margin - ob.amp_x);
        ob.cy = rng.uniform(margin + ob.amp_y, grid_.ly() - margin - ob.amp_y);
        ob.ph_x = rng.uniform(0.0, 2.0 * M_PI);
        ob.ph_y = rng.uniform(0.0, 2.0 * M_PI);
        ob.spin = rng.uniform() < 0.3 ? rng.uniform(-2.0, 2.0) : 0.0;
        obstacles_.push_back(ob);
    }
}

EnvFrame TrainingEnv::frame(int t) const {
    check(t >= 0, "TrainingEnv::frame: negative frame index");
    const double time = t * grid_.dt;
    const int nx = grid_.nx, ny = grid_.ny;
    Tensor b = Tensor::zeros(grid_.cell_shape());
    Tensor vx = Tensor::zeros(grid_.cell_shape());
    Tensor vy = Tensor::zeros(grid_.cell_shape());

    couple::SoftnessParams sp;
    sp.sigma = opt_.mask_sigma;
    sp.xi = opt_.mask_sigma;
    sp.tau = opt_.mask_sigma;

    Tape scratch;
    scratch.recording = false;

    for (const auto& ob : obstacles_) {
        const int k = ob.shape.h();
        const double cx = ob.cx + ob.amp_x * std::sin(ob.om_x * time + ob.ph_x);
        const double cy = ob.cy + ob.amp_y * std::sin(ob.om_y * time + ob.ph_y);
        const double vcx = ob.amp_x * ob.om_x * std::cos(ob.om_x * time + ob.ph_x);
        const double vcy = ob.amp_y * ob.om_y * std::cos(ob.om_y * time + ob.ph_y);
        const double ang = ob.spin * time, ca = std::cos(ang), sa = std::sin(ang);

        Tensor q = Tensor::uninit({1, k, 2});
        Tensor qdot = Tensor::uninit({1, k, 2});
        for (int i = 0; i < k; ++i) {
            const double px = ob.shape.data()[2 * i], py = ob.shape.data()[2 * i + 1];
            const double rx = ca * px - sa * py, ry = sa * px + ca * py;
            q.raw()[2 * i] = cx + rx;
            q.raw()[2 * i + 1] = cy + ry;
            qdot.raw()[2 * i] = vcx - ob.spin * ry;
            qdot.raw()[2 * i + 1] = vcy + ob.spin * rx;
        }
        couple::BoundaryVar bc = couple::boundary_condition(scratch, constant(q), constant(qdot),
                                                            centers_, grid_, sp);
        // painter by mask dominance
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (bc.b.val.data()[i] > b.data()[i]) {
                b.raw()[i] = bc.b.val.data()[i];
                vx.raw()[i] = bc.vdx_c.val.data()[i];
                vy.raw()[i] = bc.vdy_c.val.data()[i];
            }
        }
    }

    // wall ring (2 cells): solid, still or moving-belt
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (j >= 2 && j < ny - 2 && i >= 2 && i < nx - 2) continue;
            std::size_t id = std::size_t(j) * nx + i;
            b.raw()[id] = 1.0;
            vx.raw()[id] = belt_speed_;
            vy.raw()[id] = 0.0;
        }

    EnvFrame f;
    f.b = b;
    f.vdx_c = vx;
    f.vdy_c = vy;
    f.vdx = center_to_facex(scratch, constant(vx)).val;
    f.vdy = center_to_facey(scratch, constant(vy)).val;
    return f;
}

} // namespace finflow::fluid
