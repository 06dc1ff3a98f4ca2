#include "finflow/opt/cmaes.hpp"

#include "finflow/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace finflow::opt {

OptRun cmaes_baseline(ObjectiveEval& eval, const CmaesConfig& cfg) {
    check(cfg.lambda >= 2, "cmaes_baseline: population must be >= 2");
    check(cfg.budget >= cfg.lambda, "cmaes_baseline: budget below one generation");
    
    // strategy constants for n = 1
    const int n = 1;
    const int lambda = cfg.lambda;
    const int mu = lambda / 2;
    std::vector<double> w(std::size_t(mu), 0.0);
    double wsum = 0.0;
    for (int i = 0; i < mu; ++i) {
        w[std::size_t(i)] = std::log(mu + 0.5) - std::log(i + 1.0);
        wsum += w[std::size_t(i)];
    }
    double mu_eff_num = 0.0, mu_eff_den = 0.0;
    for (int i = 0; i < mu; ++i) {
        w[std::size_t(i)] /= wsum;
        mu_eff_num += w[std::size_t(i)];
        mu_eff_den += w[std::size_t(i)] * w[std::size_t(i)];
    }
    const double mu_eff = mu_eff_num * mu_eff_num / mu_eff_den;
    const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                                ((n + 2.0) * (n + 2.0) + mu_eff));
    const double chi_n = std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    Rng rng(cfg.seed ^ 0xCAE5CAE5ull);
    double mean = cfg.omega0;
    double sigma = cfg.sigma0;
    double cvar = 1.0; // scalar covariance
    double p_sigma = 0.0, p_c = 0.0;

    OptRun run;
    run.method = "cmaes";

    struct Sample {
        double z, x, f;
    };
    int gen = 0;
    while (run.evals + lambda <= cfg.budget) {
        std::vector<Sample> pop(std::size_t(lambda), Sample{});
        std::vector<double> omegas(std::size_t(lambda), 0.0);
        for (int i = 0; i < lambda; ++i) {
            double z = rng.normal();
            double x = mean + sigma * std::sqrt(cvar) * z;
            omegas[std::size_t(i)] = std::clamp(x, cfg.omega_lo, cfg.omega_hi);
            pop[std::size_t(i)].z = z;
        }
        // population members are independent episodes; evaluate as a batch
        std::vector<double> fitness = eval.value_batch(omegas);
        for (int i = 0; i < lambda; ++i) {
            run.evals += 1;
            pop[std::size_t(i)].x = omegas[std::size_t(i)];
            pop[std::size_t(i)].f = fitness[std::size_t(i)];
            if (fitness[std::size_t(i)] < run.best_objective) {
                run.best_objective = fitness[std::size_t(i)];
                run.best_omega = omegas[std::size_t(i)];
            }
        }
        std::sort(pop.begin(), pop.end(), [](const Sample& a, const Sample& b) { return a.f < b.f; });

        double z_w = 0.0, x_w = 0.0;
        for (int i = 0; i < mu; ++i) {
            z_w += w[std::size_t(i)] * pop[std::size_t(i)].z;
            x_w += w[std::size_t(i)] * pop[std::size_t(i)].x;
        }
        mean = x_w;
        p_sigma = (1.0 - c_sigma) * p_sigma +
                  std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * z_w;
        const bool hsig = std::fabs(p_sigma) / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) <
                          (1.4 + 2.0 / (n + 1.0)) * chi_n;
        p_c = (1.0 - c_c) * p_c +
              (hsig ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) * std::sqrt(cvar) * z_w : 0.0);
        double rank_mu = 0.0;
        for (int i = 0; i < mu; ++i)
            rank_mu += w[std::size_t(i)] * cvar * pop[std::size_t(i)].z * pop[std::size_t(i)].z;
        cvar = (1.0 - c_1 - c_mu) * cvar + c_1 * (p_c * p_c + (hsig ? 0.0 : c_c * (2.0 - c_c) * cvar)) +
               c_mu * rank_mu;
        cvar = std::max(cvar, 1e-20);
        sigma *= std::exp((c_sigma / d_sigma) * (std::fabs(p_sigma) / chi_n - 1.0));
        sigma = std::clamp(sigma, 1e-12, 1e6);

        run.history.push_back(
            {gen, run.evals, run.best_omega, run.best_objective, 0.0});
        ++gen;
    }
    check(!run.history.empty(), "cmaes_baseline: budget too small for one generation");
    return run;
}

} // namespace finflow::opt
