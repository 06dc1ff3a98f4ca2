#include "finflow/fluid/trainer.hpp"

#include "finflow/core/rng.hpp"
#include "finflow/opt/adam.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace finflow::fluid {

using namespace ad;

namespace {

struct PoolEntry {
    Tensor a, p;
    TrainingEnv env;
    int frame = 0;
    FluidParams fp;
};

FluidParams sample_params(Rng& rng, const TrainerConfig& cfg) {
    FluidParams fp = cfg.fp;
    if (cfg.rho_hi > cfg.rho_lo && cfg.rho_lo > 0) fp.rho = rng.uniform(cfg.rho_lo, cfg.rho_hi);
    if (cfg.mu_hi > cfg.mu_lo && cfg.mu_lo > 0) fp.mu = rng.uniform(cfg.mu_lo, cfg.mu_hi);
    return fp;
}

PoolEntry fresh_entry(Rng& rng, const TrainerConfig& cfg) {
    PoolEntry e{Tensor::zeros(cfg.grid.corner_shape()), Tensor::zeros(cfg.grid.cell_shape()),
                TrainingEnv(rng.next_u64(), cfg.grid, cfg.env), 0, sample_params(rng, cfg)};
    return e;
}

couple::BoundaryVar to_boundary_var(const EnvFrame& f) {
    couple::BoundaryVar bc;
    bc.b = constant(f.b);
    bc.vdx_c = constant(f.vdx_c);
    bc.vdy_c = constant(f.vdy_c);
    bc.vdx = constant(f.vdx);
    bc.vdy = constant(f.vdy);
    return bc;
}

} // namespace

TrainResult train_network(SurrogateNet& net, const TrainerConfig& cfg, std::ostream* log) {
    cfg.grid.validate();
    cfg.fp.validate();
    check(cfg.batch >= 1 && cfg.pool_size >= 1, "train_network: batch and pool must be >= 1");
    check(cfg.iterations >= 0, "train_network: negative iteration count");

    TrainResult result;
    if (cfg.iterations == 0) return result; // weights untouched, empty history

    Rng rng(cfg.seed);
    std::vector<PoolEntry> pool;
    pool.reserve(std::size_t(cfg.pool_size));
    for (int i = 0; i < cfg.pool_size; ++i) pool.push_back(fresh_entry(rng, cfg));

    opt::Adam adam(cfg.lr);
    double initial_loss = -1.0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        Tape tape;
        std::vector<DiffVar> wvars = net.weight_vars(tape, /*as_leaves=*/true);

        DiffVar batch_loss = constant(0.0);
        double lp_acc = 0.0, lb_acc = 0.0;
        std::vector<std::pair<int, FluidStateVar>> writeback;
        for (int bi = 0; bi < cfg.batch; ++bi) {
            const int pick = rng.uniform_int(0, cfg.pool_size - 1);
            PoolEntry& e = pool[std::size_t(pick)];
            couple::BoundaryVar bc = to_boundary_var(e.env.frame(e.frame));
            FluidStateVar st{constant(e.a), constant(e.p)};
            FluidStateVar next = predict_step(tape, net, wvars, st, bc, cfg.grid);
            ResidualLoss rl = ns_residual_loss(tape, st, next, bc, e.fp, cfg.grid);
            batch_loss = add(tape, batch_loss, rl.total);
            lp_acc += rl.lp.val.scalar_value();
            lb_acc += rl.lb.val.scalar_value();
            writeback.push_back({pick, next});
        }
        batch_loss = scale(tape, batch_loss, 1.0 / cfg.batch);
        const double loss_val = batch_loss.val.scalar_value();
        if (initial_loss < 0) initial_loss = loss_val;
        if (loss_val > 1e6 * std::max(initial_loss, 1e-12))
            throw SimError("train_network: divergence at iteration " + std::to_string(iter) +
                           " (loss " + std::to_string(loss_val) + " vs initial " +
                           std::to_string(initial_loss) + "); lower the learning rate");

        GradStore gs = tape.backward(batch_loss);
        std::vector<Tensor> grads;
        grads.reserve(wvars.size());
        for (std::size_t k = 0; k < wvars.size(); ++k)
            grads.push_back(gs.grad_or_zero(wvars[k].node, net.weights()[k].shape()));
        if (cfg.clip_norm > 0.0) {
            double norm2 = 0.0;
            for (const auto& g : grads) norm2 += kern::ops().dot(g.data(), g.data(), g.size());
            double norm = std::sqrt(norm2);
            if (norm > cfg.clip_norm)
                for (auto& g : grads) kern::ops().scale(cfg.clip_norm / norm, g.data(), g.raw(), g.size());
        }
        if (cfg.lr_decay > 0.0 && cfg.lr_decay != 1.0)
            adam.set_lr(cfg.lr * std::pow(cfg.lr_decay, double(iter) / cfg.iterations));
        adam.step(net.weights(), grads);

        // feed predictions back into the pool
        for (auto& [pick, next] : writeback) {
            PoolEntry& e = pool[std::size_t(pick)];
            e.a = next.a.val;
            e.p = next.p.val;
            e.frame++;
            if (e.frame >= e.env.frames() || rng.uniform() < cfg.reset_prob)
                e = fresh_entry(rng, cfg);
        }

        result.history.push_back({iter, lp_acc / cfg.batch, lb_acc / cfg.batch, loss_val});
        if (log && (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations))
            (*log) << "iter " << iter << "  Lp " << lp_acc / cfg.batch << "  Lb " << lb_acc / cfg.batch
                   << "  L " << loss_val << "\n";
    }

    result.initial_loss = result.history.front().total;
    const int tail = std::min<int>(20, int(result.history.size()));
    double acc = 0.0;
    for (int i = 0; i < tail; ++i) acc += result.history[result.history.size() - 1 - i].total;
    result.final_loss = acc / tail;
    return result;
}

void save_history_csv(const std::vector<TrainHistoryRow>& rows, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot write loss history: " + path);
    f << "iteration,L_p,L_b,L\n";
    f.precision(12);
    for (const auto& r : rows) f << r.iter << "," << r.lp << "," << r.lb << "," << r.total << "\n";
}

} // namespace finflow::fluid
