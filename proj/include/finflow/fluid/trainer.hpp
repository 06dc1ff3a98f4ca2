#pragma once

#include "finflow/fluid/env.hpp"
#include "finflow/fluid/residual.hpp"
#include "finflow/fluid/unet.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace finflow::fluid {

struct TrainerConfig {
    MacGrid grid;
    FluidParams fp;           // base parameters
    double rho_lo = 0, rho_hi = 0; // >0: sample per episode within [lo,hi]
    double mu_lo = 0, mu_hi = 0;
    int iterations = 2000;
    int batch = 2;
    int pool_size = 24;
    double lr = 2e-4;
    double lr_decay = 0.3;    // final lr = lr * lr_decay, exponential schedule
    double clip_norm = 1.0;   // global gradient-norm clip; 0 disables
    std::uint64_t seed = 1;
    double reset_prob = 0.01;
    EnvOptions env;
    int log_every = 25;
};

struct TrainHistoryRow {
    int iter;
    double lp, lb, total;
};

struct TrainResult {
    std::vector<TrainHistoryRow> history;
    double initial_loss = 0.0;
    double final_loss = 0.0; // mean over the last logged window
};

// Unsupervised residual training with a replay pool: each iteration draws a
// batch of pooled states, advances them one predicted step, descends the
// Navier-Stokes residual loss, and writes the predictions back to the pool.
// Aborts with diagnostics if the loss exceeds 1e6 x its initial value.
TrainResult train_network(SurrogateNet& net, const TrainerConfig& cfg, std::ostream* log = nullptr);

void save_history_csv(const std::vector<TrainHistoryRow>& rows, const std::string& path);

} // namespace finflow::fluid
