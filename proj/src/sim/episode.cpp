#include "finflow/sim/episode.hpp"

#include "finflow/solid/surface.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

namespace finflow::sim {

using namespace ad;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

double burn_in_scale(int t, int burn_in) {
    check(t >= 0, "burn_in_scale: negative step index");
    if (burn_in <= 0) return 1.0;
    return std::min(double(t) / double(burn_in), 1.0);
}

Episode::Episode(EpisodeConfig cfg, const fluid::SurrogateNet* net)
    : cfg_(std::move(cfg)), net_(net) {
    check(net_ != nullptr, "Episode: missing surrogate net");
    cfg_.grid.validate();
    cfg_.fluid_params.validate();
    cfg_.softness.validate();
    cfg_.swimmer.validate();
    check(cfg_.steps >= 1, "Episode: step count must be >= 1");
    check(cfg_.burn_in >= 0, "Episode: burn-in must be >= 0");

    mesh_ = swim::build_profile_mesh(cfg_.swimmer);
    // place the body: tail at start_x_frac * lx, vertically centered
    const double x0 = cfg_.start_x_frac * cfg_.grid.lx();
    const double y0 = 0.5 * cfg_.grid.ly();
    {
        double* p = mesh_.rest.raw();
        for (int i = 0; i < mesh_.n_nodes(); ++i) {
            p[2 * i] += x0;
            p[2 * i + 1] += y0;
        }
    }
    // margin >= 10 cells between the body and every wall
    const double margin = 10.0 * cfg_.grid.dx;
    double amp_max = cfg_.swimmer.act.amplitude_c * 0.1 * cfg_.swimmer.length; // envelope peak
    for (int i = 0; i < mesh_.n_nodes(); ++i) {
        const double px = mesh_.rest.data()[2 * i], py = mesh_.rest.data()[2 * i + 1];
        check(px > margin && px < cfg_.grid.lx() - margin && py > margin + amp_max &&
                  py < cfg_.grid.ly() - margin - amp_max,
              "Episode: swimmer does not fit in the grid with a 10-cell margin");
    }

    fem_ = std::make_unique<solid::FemSystem>(mesh_, cfg_.material, cfg_.grid.dt,
                                              cfg_.rayleigh_damping);
    centers_ = cfg_.grid.cell_centers();

    double cx = 0, cy = 0;
    for (int i = 0; i < mesh_.n_nodes(); ++i) {
        cx += mesh_.rest.data()[2 * i] / mesh_.n_nodes();
        cy += mesh_.rest.data()[2 * i + 1] / mesh_.n_nodes();
    }
    rest_cy_ = cy;
    rest_offsets_ = Tensor::uninit(mesh_.rest.shape());
    rest_off_x_ = Tensor::uninit({1, mesh_.n_nodes(), 1});
    rest_off_y_ = Tensor::uninit({1, mesh_.n_nodes(), 1});
    for (int i = 0; i < mesh_.n_nodes(); ++i) {
        rest_offsets_.raw()[2 * i] = mesh_.rest.data()[2 * i] - cx;
        rest_offsets_.raw()[2 * i + 1] = mesh_.rest.data()[2 * i + 1] - cy;
        rest_off_x_.raw()[i] = mesh_.rest.data()[2 * i] - cx;
        rest_off_y_.raw()[i] = mesh_.rest.data()[2 * i + 1] - cy;
    }
    // head = rightmost rest node (mid-height column at X = L)
    double best = -1e300;
    for (int i = 0; i < mesh_.n_nodes(); ++i) {
        double px = mesh_.rest.data()[2 * i];
        double off = std::fabs(mesh_.rest.data()[2 * i + 1] - y0);
        if (px - off * 1e-3 > best) {
            best = px - off * 1e-3;
            head_node_ = i;
        }
    }
}

std::vector<Tensor> Episode::initial_state() const {
    return {mesh_.rest, Tensor::zeros(mesh_.rest.shape()), Tensor::zeros(cfg_.grid.corner_shape()),
            Tensor::zeros(cfg_.grid.cell_shape())};
}

StepFn Episode::step_fn(std::vector<TrajectoryRow>* recorder, const SnapshotFn& snap,
                        int snapshot_every) const {
    const int n_nodes = mesh_.n_nodes();
    return [this, recorder, snap, snapshot_every, n_nodes](
               Tape& tape, int t, const std::vector<DiffVar>& state,
               const std::vector<DiffVar>& params) -> StepResult {
        DiffVar q = state[0], qdot = state[1];
        fluid::FluidStateVar fs{state[2], state[3]};
        DiffVar omega = params[0];
        const double time = t * cfg_.grid.dt;

        // (1) solid -> fluid boundary condition
        double t0 = now_s();
        double dt_coupling = 0.0, dt_fluid = 0.0, dt_solid = 0.0;
        std::vector<int> surf = mesh_.surface;
        DiffVar q_surf = gather_rows(tape, q, surf);
        DiffVar qdot_surf = gather_rows(tape, qdot, surf);
        couple::BoundaryVar bc =
            couple::boundary_condition(tape, q_surf, qdot_surf, centers_, cfg_.grid, cfg_.softness);
        dt_coupling += now_s() - t0;

        // (2) fluid prediction (state at t+1)
        t0 = now_s();
        std::vector<DiffVar> w = net_->weight_vars(tape, false);
        fluid::FluidStateVar next = fluid::predict_step(tape, *net_, w, fs, bc, cfg_.grid);
        dt_fluid += now_s() - t0;

        // (3) IBM forces from the new pressure
        t0 = now_s();
        couple::SurfaceGeometryVar geo = solid::surface_geometry(tape, q, mesh_);
        const double sprime = cfg_.softness.sigma_prime_for(cfg_.grid);
        couple::SurfaceForcesVar forces =
            couple::ibm_surface_forces(tape, next.p, bc.b, geo, centers_, sprime);
        if (cfg_.viscous_forces) {
            DiffVar fv = couple::viscous_surface_forces(tape, next.a, bc.b, geo, cfg_.grid,
                                                        centers_, sprime, cfg_.fluid_params.mu);
            forces.f_k = add(tape, forces.f_k, fv);
            forces.f_total = reduce_rows_sum(tape, forces.f_k);
        }

        // (4) burn-in smoothing; recorded forces are the smoothed ones
        const double bscale = burn_in_scale(t, cfg_.burn_in);
        DiffVar f_k = scale(tape, forces.f_k, bscale);
        DiffVar f_total = scale(tape, forces.f_total, bscale);

        DiffVar f_ext;
        if (cfg_.force_mode == ForceMode::Averaged) {
            f_ext = couple::aggregate_average_force(tape, f_total, n_nodes);
        } else {
            f_ext = scatter_add_rows(tape, f_k, surf, n_nodes);
        }
        dt_coupling += now_s() - t0;

        // (5) x-axis lock: remove mean lateral displacement and rotation
        if (cfg_.x_axis_lock) {
            DiffVar c = scale(tape, reduce_rows_sum(tape, q), 1.0 / n_nodes);
            DiffVar cx = crop(tape, c, 0, 1, 0, 1, 0, 1);
            DiffVar cy = crop(tape, c, 0, 1, 0, 1, 1, 1);
            DiffVar qx = crop(tape, q, 0, 1, 0, n_nodes, 0, 1);
            DiffVar qy = crop(tape, q, 0, 1, 0, n_nodes, 1, 1);
            DiffVar dx = sub(tape, qx, cx);
            DiffVar dy = sub(tape, qy, cy);
            DiffVar r0x = constant(rest_off_x_);
            DiffVar r0y = constant(rest_off_y_);
            // optimal rigid alignment angle against the rest offsets
            DiffVar s_num = reduce_sum(tape, sub(tape, mul(tape, r0x, dy), mul(tape, r0y, dx)));
            DiffVar c_num = reduce_sum(tape, add(tape, mul(tape, r0x, dx), mul(tape, r0y, dy)));
            DiffVar theta = vatan2(tape, s_num, c_num);
            DiffVar ct = vcos(tape, theta), st = vsin(tape, theta);
            // rotate by -theta about the centroid, re-center laterally
            DiffVar qx_new = add(tape, cx, add(tape, mul(tape, dx, ct), mul(tape, dy, st)));
            DiffVar qy_new = add(tape, constant(rest_cy_),
                                 sub(tape, mul(tape, dy, ct), mul(tape, dx, st)));
            q = concat_w(tape, qx_new, qy_new);

            // velocities: remove mean lateral velocity and net rotation rate
            DiffVar vx = crop(tape, qdot, 0, 1, 0, n_nodes, 0, 1);
            DiffVar vy = crop(tape, qdot, 0, 1, 0, n_nodes, 1, 1);
            DiffVar vy_mean = scale(tape, reduce_sum(tape, vy), 1.0 / n_nodes);
            DiffVar rx = sub(tape, qx_new, cx);
            DiffVar ry = sub(tape, qy_new, constant(rest_cy_));
            DiffVar om_num = reduce_sum(tape, sub(tape, mul(tape, rx, vy), mul(tape, ry, vx)));
            DiffVar om_den = add(tape, reduce_sum(tape, add(tape, mul(tape, rx, rx), mul(tape, ry, ry))),
                                 constant(1e-30));
            DiffVar om = div(tape, om_num, om_den);
            DiffVar vx_new = add(tape, vx, mul(tape, ry, om));
            DiffVar vy_new = sub(tape, sub(tape, vy, vy_mean), mul(tape, rx, om));
            qdot = concat_w(tape, vx_new, vy_new);
        }

        // (6) actuated implicit solid step
        t0 = now_s();
        DiffVar h_act = swim::controller(tape, mesh_, cfg_.swimmer, omega, time);
        double residual = 0.0;
        solid::SolidStateVar sn = fem_->implicit_step(tape, {q, qdot}, f_ext, h_act,
                                                      cfg_.solver_iters, cfg_.solver_damping,
                                                      &residual);
        dt_solid += now_s() - t0;
        {
            std::lock_guard<std::mutex> lock(diag_mutex_);
            max_residual_ = std::max(max_residual_, residual);
            timings.coupling_s += dt_coupling;
            timings.fluid_s += dt_fluid;
            timings.solid_s += dt_solid;
        }

        DiffVar loss_inc = neg(tape, crop(tape, f_total, 0, 1, 0, 1, 0, 1));

        if (recorder && !tape.recording) {
            TrajectoryRow row;
            row.step = t;
            row.time = time;
            row.head_x = sn.q.val.data()[2 * head_node_];
            row.head_y = sn.q.val.data()[2 * head_node_ + 1];
            row.fx = f_total.val.at(0, 0, 0);
            row.fy = f_total.val.at(0, 0, 1);
            row.objective_so_far =
                (recorder->empty() ? 0.0 : recorder->back().objective_so_far) +
                loss_inc.val.scalar_value();
            recorder->push_back(row);
            if (snap && snapshot_every > 0 && t % snapshot_every == 0)
                snap(t, next.p.val, bc.b.val, next.a.val);
        }

        return {{sn.q, sn.qdot, next.a, next.p}, loss_inc};
    };
}

Trajectory Episode::run_forward(double omega, const SnapshotFn& snap, int snapshot_every) const {
    max_residual_ = 0.0;
    Trajectory traj;
    CheckpointedUnroll unroll(step_fn(&traj.rows, snap, snapshot_every), initial_state(),
                              {Tensor::scalar(omega)}, cfg_.steps, std::max(cfg_.steps, 1));
    unroll.run_forward();
    traj.objective = unroll.loss();
    traj.max_solver_residual = max_residual_;
    if (!traj.rows.empty()) traj.head_dx = traj.rows.back().head_x - mesh_.rest.data()[2 * head_node_];
    return traj;
}

Episode::BackwardResult Episode::run_backward(double omega) const {
    max_residual_ = 0.0;
    BackwardResult out;
    CheckpointedUnroll unroll(step_fn(&out.traj.rows), initial_state(), {Tensor::scalar(omega)},
                              cfg_.steps, cfg_.checkpoint_segment);
    unroll.run_forward();
    out.traj.objective = unroll.loss();
    out.traj.max_solver_residual = max_residual_;
    if (!out.traj.rows.empty())
        out.traj.head_dx = out.traj.rows.back().head_x - mesh_.rest.data()[2 * head_node_];
    auto grads = unroll.backward();
    out.d_omega = grads.d_params[0].scalar_value();
    return out;
}

void save_trajectory_csv(const Trajectory& traj, const EpisodeConfig& cfg,
                         const std::string& config_hash, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot write trajectory: " + path);
    f.precision(17);
    f << "# config_hash=" << config_hash << "\n";
    f << "# grid=" << cfg.grid.nx << "x" << cfg.grid.ny << " dx=" << cfg.grid.dx
      << " dt=" << cfg.grid.dt << "\n";
    f << "# objective=" << traj.objective << "\n";
    f << "step,time,head_x,head_y,f_total_x,f_total_y,objective_so_far\n";
    for (const auto& r : traj.rows)
        f << r.step << "," << r.time << "," << r.head_x << "," << r.head_y << "," << r.fx << ","
          << r.fy << "," << r.objective_so_far << "\n";
}

Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "cannot open trajectory: " + path);
    Trajectory traj;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("step,", 0) == 0) continue;
        std::stringstream ss(line);
        TrajectoryRow r;
        char comma;
        ss >> r.step >> comma >> r.time >> comma >> r.head_x >> comma >> r.head_y >> comma >>
            r.fx >> comma >> r.fy >> comma >> r.objective_so_far;
        check(!ss.fail(), "trajectory parse error in " + path);
        traj.rows.push_back(r);
    }
    traj.objective = 0.0;
    for (const auto& r : traj.rows) traj.objective -= r.fx;
    if (!traj.rows.empty()) traj.head_dx = traj.rows.back().head_x - traj.rows.front().head_x;
    return traj;
}

} // namespace finflow::sim
