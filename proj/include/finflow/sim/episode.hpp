#pragma once

#include "finflow/ad/checkpoint.hpp"
#include "finflow/couple/ibm.hpp"
#include "finflow/fluid/residual.hpp"
#include "finflow/fluid/unet.hpp"
#include "finflow/solid/fem.hpp"
#include "finflow/swim/swimmer.hpp"

#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace finflow::sim {

enum class ForceMode { Averaged, PerSurface };

struct EpisodeConfig {
    fluid::MacGrid grid;
    fluid::FluidParams fluid_params;
    couple::SoftnessParams softness;
    swim::SwimmerSpec swimmer;
    solid::Material material;

    int steps = 500;    // T
    int burn_in = 50;   // N_burn-in; 0 disables smoothing
    bool x_axis_lock = true;
    ForceMode force_mode = ForceMode::Averaged;
    bool viscous_forces = false; // negligible for water-like mu; off by default
    int solver_iters = 8;
    double solver_damping = 1.0;
    double rayleigh_damping = 0.0;
    int checkpoint_segment = 1; // steps retained per backward segment
    double start_x_frac = 0.18; // tail position along the tank
};

struct TrajectoryRow {
    int step;
    double time;
    double head_x, head_y;
    double fx, fy; // recorded (burn-in scaled) total force
    double objective_so_far;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    double objective = 0.0; // L_opt = -sum_t f_total_x(t)
    double max_solver_residual = 0.0;
    double head_dx = 0.0; // forward displacement of the head over the run
};

// Optional per-step field dump during the forward pass
using SnapshotFn = std::function<void(int step, const Tensor& p, const Tensor& b, const Tensor& a)>;

// force scale factor min(t/N, 1); N = 0 disables smoothing
double burn_in_scale(int t, int burn_in);

// One swimmer episode against a trained (or frozen) surrogate. The coupled
// step follows the block layout: the solid state at t builds (b, v_d), the
// net predicts the fluid at t+1, IBM forces from the new pressure (burn-in
// scaled) drive the solid step to t+1.
class Episode {
public:
    Episode(EpisodeConfig cfg, const fluid::SurrogateNet* net);

    const EpisodeConfig& config() const { return cfg_; }
    const solid::Mesh& mesh() const { return mesh_; }
    const solid::FemSystem& fem() const { return *fem_; }

    Trajectory run_forward(double omega, const SnapshotFn& snap = {}, int snapshot_every = 0) const;

    struct BackwardResult {
        Trajectory traj;
        double d_omega = 0.0;
    };
    BackwardResult run_backward(double omega) const;

    // expose the raw step builder so tests can assert tape dependencies
    ad::StepFn step_fn(std::vector<TrajectoryRow>* recorder = nullptr, const SnapshotFn& snap = {},
                       int snapshot_every = 0) const;
    std::vector<Tensor> initial_state() const;

    struct Timings {
        double fluid_s = 0.0, solid_s = 0.0, coupling_s = 0.0;
    };
    mutable Timings timings; // accumulated by the step function (mutex-guarded)

private:
    mutable std::mutex diag_mutex_; // parallel sweeps share one Episode
    EpisodeConfig cfg_;
    const fluid::SurrogateNet* net_;
    solid::Mesh mesh_;
    std::unique_ptr<solid::FemSystem> fem_;
    Tensor centers_;
    Tensor rest_offsets_; // rest positions minus rest centroid, for the lock
    Tensor rest_off_x_, rest_off_y_;
    double rest_cy_ = 0.0;
    int head_node_ = 0;
    mutable double max_residual_ = 0.0;
};

void save_trajectory_csv(const Trajectory& traj, const EpisodeConfig& cfg,
                         const std::string& config_hash, const std::string& path);
// re-parse a trajectory file; returns rows and recomputes the objective
Trajectory load_trajectory_csv(const std::string& path);

} // namespace finflow::sim
