#pragma once

#include "finflow/fluid/trainer.hpp"
#include "finflow/sim/episode.hpp"

#include <string>
#include <vector>

namespace finflow::config {

// One run configuration document (JSON). Unknown keys anywhere in the file
// are rejected; every field has a default, so {} is a valid config. The
// provenance of each default (paper-sourced vs artifact choice) is tabulated
// in the README.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    fluid::MacGrid grid;              // default 300x100, dx 2.5mm, dt 0.01s
    fluid::FluidParams fluid_params;  // rho 50, mu 1.25e-4, beta 1, gamma 20
    couple::SoftnessParams softness;  // sigma=xi=tau=5e-7, sigma' = 2 dx^2
    swim::SwimmerSpec swimmer;        // L=0.2, 40x8, C=2, gamma=2pi/L, t_a=0.2
    solid::Material material;         // E=6e5, nu=0.45, rho_s=100

    // episode
    int steps = 500;
    int burn_in = 50;
    bool x_axis_lock = true;
    sim::ForceMode force_mode = sim::ForceMode::Averaged;
    bool viscous_forces = false;
    int solver_iters = 8;
    double solver_damping = 1.0;
    double rayleigh_damping = 0.0;
    int checkpoint_segment = 1;
    double start_x_frac = 0.18;

    // surrogate net + weights location
    fluid::UNetConfig net;
    std::string weights_path = "out/hydronet.ffnw";

    // training
    int train_iterations = 2000;
    int train_batch = 2;
    int train_pool = 24;
    double train_lr = 2e-4;
    double train_reset_prob = 0.01;
    int env_frames = 96;
    double env_speed_lo = 0.05;
    double env_speed_hi = 0.25;
    double rho_lo = 0, rho_hi = 0; // 0 = train at the point value
    double mu_lo = 0, mu_hi = 0;
    int train_log_every = 25;

    // optimizer
    double omega0_hz = 2.0;
    int opt_iters = 40;
    double opt_lr = 0.5;
    double omega_max_hz = 20.0;
    int opt_max_retries = 3;
    double cmaes_sigma0_hz = 1.0;
    int cmaes_budget = 0; // 0 = match the gradient run's evaluations
    int cmaes_lambda = 4;
    std::uint64_t cmaes_seed = 1;

    // sweep
    std::vector<double> sweep_frequencies_hz = {3, 4, 5, 6, 7};
    int sweep_steps = 120;

    static RunConfig load(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string canonical_json() const;
    std::string hash() const; // FNV-1a over the canonical document

    sim::EpisodeConfig episode_config() const;
    fluid::TrainerConfig trainer_config() const;
    void validate() const;
};

} // namespace finflow::config
