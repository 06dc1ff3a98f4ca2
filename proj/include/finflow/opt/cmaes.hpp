#pragma once

#include "finflow/opt/freq_opt.hpp"

namespace finflow::opt {

struct CmaesConfig {
    double omega0 = 2.0 * 3.14159265358979323846 * 2.0; // rad/s
    double sigma0 = 2.0 * 3.14159265358979323846; // uninformative 1 Hz, in rad/s
    int budget = 40;        // episode evaluations
    int lambda = 4;         // population size
    std::uint64_t seed = 1;
    double omega_lo = 0.05; // rad/s box
    double omega_hi = 2.0 * 3.14159265358979323846 * 20.0;
};

// (mu/mu_w, lambda)-CMA-ES specialized to the single frequency parameter:
// the covariance degenerates to a scalar variance adapted by rank-one and
// rank-mu updates, with cumulative step-size control. Operates directly on
// omega with box projection of the samples; deterministic given the seed.
// Records the best-so-far objective per generation.
OptRun cmaes_baseline(ObjectiveEval& eval, const CmaesConfig& cfg);

} // namespace finflow::opt
