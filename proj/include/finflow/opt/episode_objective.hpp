#pragma once

#include "finflow/opt/freq_opt.hpp"
#include "finflow/sim/episode.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace finflow::opt {

// Adapts an Episode to the optimizer interface. Episodes are stateless per
// run, so population batches may evaluate on independent threads.
class EpisodeObjective : public ObjectiveEval {
public:
    explicit EpisodeObjective(const sim::Episode& ep) : ep_(&ep) {}

    double value(double omega) override { return ep_->run_forward(omega).objective; }

    std::pair<double, double> value_grad(double omega) override {
        auto r = ep_->run_backward(omega);
        return {r.traj.objective, r.d_omega};
    }

    std::vector<double> value_batch(const std::vector<double>& omegas) override {
        std::vector<double> out(omegas.size(), 1e12);
        int pool = 1;
        if (const char* env = std::getenv("FINFLOW_THREADS")) pool = std::max(1, std::atoi(env));
        else pool = int(std::max(1u, std::thread::hardware_concurrency()));
        pool = std::min<int>(pool, int(omegas.size()));
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> workers;
        for (int w = 0; w < pool; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < omegas.size();
                     i = cursor.fetch_add(1)) {
                    try {
                        out[i] = ep_->run_forward(omegas[i]).objective;
                    } catch (const SimError&) {
                        out[i] = 1e12;
                    }
                }
            });
        for (auto& w : workers) w.join();
        return out;
    }

private:
    const sim::Episode* ep_;
};

} // namespace finflow::opt
