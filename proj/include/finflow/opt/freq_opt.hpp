#pragma once

#include "finflow/core/check.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace finflow::opt {

// Objective evaluator: value() is one forward episode returning L_opt
// (lower is better); value_grad() adds the reverse pass. Episode instability
// surfaces as SimError and is handled by the optimizer's rejection rule.
class ObjectiveEval {
public:
    virtual ~ObjectiveEval() = default;
    virtual double value(double omega) = 0;
    virtual std::pair<double, double> value_grad(double omega) = 0; // {L, dL/domega}

    // population evaluation; members are independent, so implementations may
    // run them on separate threads. An unstable member reports 1e12 (worst
    // fitness) rather than aborting the whole generation.
    virtual std::vector<double> value_batch(const std::vector<double>& omegas) {
        std::vector<double> out;
        out.reserve(omegas.size());
        for (double w : omegas) {
            try {
                out.push_back(value(w));
            } catch (const SimError&) {
                out.push_back(1e12);
            }
        }
        return out;
    }
};

struct OptRecord {
    int iter = 0;
    int evals = 0;       // cumulative episode evaluations
    double omega = 0.0;  // rad/s
    double objective = 0.0;
    double gradient = 0.0; // dL/domega (0 for gradient-free records)
};

struct OptRun {
    std::string method;
    std::vector<OptRecord> history;
    double best_omega = 0.0;
    double best_objective = 1e300;
    int evals = 0;
};

struct FreqOptConfig {
    double omega0 = 2.0 * 3.14159265358979323846 * 2.0; // 2 Hz
    int iters = 40;
    double lr = 0.5; // rad/s-scale step; applied in log-omega space as lr/omega0
    double beta1 = 0.9, beta2 = 0.999;
    double omega_max = 2.0 * 3.14159265358979323846 * 20.0;
    int max_retries = 3;
};

// Adaptive-moment descent on L(omega), omega parameterized in log space to
// keep positivity smooth, projected to (0, omega_max]. An unstable episode
// rejects the step, halves the learning rate and retries (up to max_retries),
// after which the run aborts with the history collected so far.
OptRun optimize_frequency(ObjectiveEval& eval, const FreqOptConfig& cfg);

} // namespace finflow::opt
