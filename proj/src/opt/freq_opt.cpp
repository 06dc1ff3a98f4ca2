#include "finflow/opt/freq_opt.hpp"

#include <cmath>

namespace finflow::opt {

OptRun optimize_frequency(ObjectiveEval& eval, const FreqOptConfig& cfg) {
    check(cfg.iters >= 1, "optimize_frequency: iters must be >= 1");
    check(cfg.lr > 0.0 && cfg.omega0 > 0.0, "optimize_frequency: lr and omega0 must be positive");

    OptRun run;
    run.method = "gradient";
    double theta = std::log(cfg.omega0);
    const double lr_theta0 = cfg.lr / cfg.omega0; // rad/s step mapped to log space
    double lr = lr_theta0;
    double m = 0.0, v = 0.0;
    int adam_t = 0;

    for (int it = 0; it < cfg.iters; ++it) {
        double omega = std::min(std::exp(theta), cfg.omega_max);
        double L = 0.0, g = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt <= cfg.max_retries && !ok; ++attempt) {
            try {
                auto [val, grad] = eval.value_grad(omega);
                run.evals += 1;
                L = val;
                g = grad;
                ok = true;
            } catch (const SimError&) {
                run.evals += 1;
                // unstable episode: halve the learning rate and pull omega
                // back toward the last accepted point
                lr *= 0.5;
                if (!run.history.empty()) {
                    double prev = run.history.back().omega;
                    omega = std::min(0.5 * (omega + prev), cfg.omega_max);
                    theta = std::log(omega);
                } else {
                    omega = cfg.omega0;
                    theta = std::log(omega);
                }
            }
        }
        if (!ok)
            throw SimError("optimize_frequency: episode unstable after " +
                           std::to_string(cfg.max_retries) + " retries at iteration " +
                           std::to_string(it));

        run.history.push_back({it, run.evals, omega, L, g});
        if (L < run.best_objective) {
            run.best_objective = L;
            run.best_omega = omega;
        }

        // adaptive-moment update in log space: dL/dtheta = omega dL/domega
        double g_theta = g * omega;
        ++adam_t;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g_theta;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g_theta * g_theta;
        double mh = m / (1.0 - std::pow(cfg.beta1, adam_t));
        double vh = v / (1.0 - std::pow(cfg.beta2, adam_t));
        theta -= lr * mh / (std::sqrt(vh) + 1e-8);
        theta = std::min(theta, std::log(cfg.omega_max));
    }
    return run;
}

} // namespace finflow::opt
