#include "finflow/ad/gradcheck.hpp"
#include "finflow/config/run_config.hpp"
#include "finflow/core/image.hpp"
#include "finflow/core/snapshot.hpp"
#include "finflow/opt/cmaes.hpp"
#include "finflow/opt/episode_objective.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace finflow;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

int thread_count() {
    if (const char* env = std::getenv("FINFLOW_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

std::uint64_t g_seed_override = 0;
std::string g_out_override;

config::RunConfig load_config_or_exit(const std::string& path) {
    if (!fs::exists(path)) {
        std::cerr << "error: config file not found: " << path << "\n";
        std::exit(2);
    }
    try {
        config::RunConfig cfg = config::RunConfig::load(path);
        if (g_seed_override != 0) cfg.seed = g_seed_override;
        if (!g_out_override.empty()) cfg.output_dir = g_out_override;
        return cfg;
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(2);
    }
}

fluid::SurrogateNet load_or_init_net(const config::RunConfig& cfg, bool allow_init) {
    if (fs::exists(cfg.weights_path)) {
        std::cout << "loading weights from " << cfg.weights_path << "\n";
        return fluid::SurrogateNet::load(cfg.weights_path);
    }
    if (!allow_init) {
        std::cerr << "error: weights file not found: " << cfg.weights_path
                  << " (run `finflow train-fluid` first)\n";
        std::exit(1);
    }
    std::cout << "weights file not found; using seeded untrained weights\n";
    return fluid::SurrogateNet(cfg.net, cfg.seed ^ 0xFEEDULL);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    check(f.good(), "cannot write " + path);
    f << text;
}

void save_opt_history_csv(const opt::OptRun& run, const std::string& hash,
                          const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot write " + path);
    f.precision(12);
    f << "# config_hash=" << hash << "\n";
    f << "# method=" << run.method << "\n";
    f << "iteration,evaluations,omega_hz,objective,gradient\n";
    for (const auto& r : run.history)
        f << r.iter << "," << r.evals << "," << r.omega / kTwoPi << "," << r.objective << ","
          << r.gradient << "\n";
}

int cmd_train_fluid(const std::string& config_path) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fs::create_directories(cfg.output_dir);
    fluid::SurrogateNet net(cfg.net, cfg.seed ^ 0xFEEDULL);
    std::cout << "training surrogate: " << cfg.train_iterations << " iterations on " << cfg.grid.nx
              << "x" << cfg.grid.ny << " grid, " << net.param_count() << " parameters\n";
    fluid::TrainResult result;
    try {
        result = fluid::train_network(net, cfg.trainer_config(), &std::cout);
    } catch (const SimError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 1;
    }
    net.save(cfg.weights_path);
    fluid::save_history_csv(result.history, cfg.output_dir + "/loss_history.csv");
    std::cout << "saved weights to " << cfg.weights_path << "\n";
    if (!result.history.empty())
        std::cout << "loss: initial " << result.initial_loss << " final " << result.final_loss
                  << " (" << result.initial_loss / std::max(result.final_loss, 1e-300)
                  << "x reduction)\n";

    // resting-noise calibration: quiescent 1-step episode force magnitude
    try {
        sim::EpisodeConfig ec = cfg.episode_config();
        ec.steps = 1;
        ec.burn_in = 0;
        ec.swimmer.act.amplitude_c = 0.0;
        sim::Episode ep(ec, &net);
        sim::Trajectory tr = ep.run_forward(kTwoPi * 2.0);
        double noise = std::hypot(tr.rows[0].fx, tr.rows[0].fy);
        nlohmann::json j;
        j["resting_force_noise"] = noise;
        write_text(cfg.weights_path + ".noise.json", j.dump(2));
        std::cout << "resting-force noise: " << noise << " N\n";
    } catch (const SimError& e) {
        std::cout << "note: resting-noise calibration skipped (" << e.what() << ")\n";
    }
    return 0;
}

int cmd_simulate(const std::string& config_path, double omega_hz, int snapshot_every,
                 bool snapshot_csv) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fs::create_directories(cfg.output_dir);
    fluid::SurrogateNet net = load_or_init_net(cfg, true);
    sim::Episode ep(cfg.episode_config(), &net);
    const double omega = (omega_hz > 0 ? omega_hz : cfg.omega0_hz) * kTwoPi;
    std::cout << "simulating " << cfg.steps << " steps at " << omega / kTwoPi << " Hz\n";

    sim::SnapshotFn snap;
    if (snapshot_every > 0) {
        snap = [&](int step, const Tensor& p, const Tensor& b, const Tensor& a) {
            std::string stem = cfg.output_dir + "/fields_" + std::to_string(step);
            if (snapshot_csv) {
                save_snapshot_csv(p, stem + "_p.csv");
                save_snapshot_csv(b, stem + "_b.csv");
            } else {
                save_snapshot(p, stem + "_p.ffs");
                save_snapshot(b, stem + "_b.ffs");
                save_snapshot(a, stem + "_a.ffs");
            }
            Image img = render_field(p);
            overlay_mask(img, b);
            img.save_ppm(stem + "_pressure.ppm");
        };
    }
    double t0 = now_s();
    sim::Trajectory tr = ep.run_forward(omega, snap, snapshot_every);
    std::cout << "forward pass " << now_s() - t0 << " s, objective " << tr.objective
              << ", head displacement " << tr.head_dx << " m\n";
    if (tr.max_solver_residual > 1e3)
        std::cout << "warning: solid solver residual reached " << tr.max_solver_residual
                  << " N; consider more solver iterations\n";
    sim::save_trajectory_csv(tr, ep.config(), cfg.hash(), cfg.output_dir + "/trajectory.csv");
    std::cout << "wrote " << cfg.output_dir << "/trajectory.csv\n";
    return 0;
}

int cmd_sweep(const std::string& config_path) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fs::create_directories(cfg.output_dir);
    fluid::SurrogateNet net = load_or_init_net(cfg, false);
    sim::EpisodeConfig ec = cfg.episode_config();
    ec.steps = cfg.sweep_steps;
    sim::Episode ep(ec, &net);

    const auto& freqs = cfg.sweep_frequencies_hz;
    std::vector<sim::Trajectory> results(freqs.size());
    std::vector<std::thread> workers;
    const int pool = std::min<int>(thread_count(), int(freqs.size()));
    std::atomic<std::size_t> cursor{0};
    for (int w = 0; w < pool; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = cursor.fetch_add(1); i < freqs.size(); i = cursor.fetch_add(1))
                results[i] = ep.run_forward(freqs[i] * kTwoPi);
        });
    for (auto& w : workers) w.join();

    std::ofstream f(cfg.output_dir + "/sweep.csv");
    f.precision(12);
    f << "# config_hash=" << cfg.hash() << "\n";
    f << "frequency_hz,head_dx_m,objective\n";
    Series s{"head_dx", {}, {}, {200, 40, 40}};
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        f << freqs[i] << "," << results[i].head_dx << "," << results[i].objective << "\n";
        std::cout << freqs[i] << " Hz: head displacement " << results[i].head_dx << " m, objective "
                  << results[i].objective << "\n";
        sim::save_trajectory_csv(results[i], ec, cfg.hash(),
                                 cfg.output_dir + "/trajectory_" + std::to_string(freqs[i]) +
                                     "hz.csv");
        s.x.push_back(freqs[i]);
        s.y.push_back(results[i].head_dx);
    }
    render_chart({s}).save_ppm(cfg.output_dir + "/sweep.ppm");
    std::cout << "wrote " << cfg.output_dir << "/sweep.csv and sweep.ppm\n";
    return 0;
}

int cmd_optimize(const std::string& config_path, bool skip_cmaes) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fs::create_directories(cfg.output_dir);
    fluid::SurrogateNet net = load_or_init_net(cfg, false);
    sim::Episode ep(cfg.episode_config(), &net);
    opt::EpisodeObjective objective(ep);

    opt::FreqOptConfig ocfg;
    ocfg.omega0 = cfg.omega0_hz * kTwoPi;
    ocfg.iters = cfg.opt_iters;
    ocfg.lr = cfg.opt_lr;
    ocfg.omega_max = cfg.omega_max_hz * kTwoPi;
    ocfg.max_retries = cfg.opt_max_retries;
    std::cout << "gradient optimization from " << cfg.omega0_hz << " Hz, " << cfg.opt_iters
              << " iterations\n";
    double t0 = now_s();
    opt::OptRun grun = opt::optimize_frequency(objective, ocfg);
    std::cout << "gradient: best " << grun.best_omega / kTwoPi << " Hz, objective "
              << grun.best_objective << " (" << now_s() - t0 << " s, " << grun.evals
              << " evaluations)\n";
    save_opt_history_csv(grun, cfg.hash(), cfg.output_dir + "/opt_gradient.csv");

    std::vector<Series> series;
    Series gs{"gradient", {}, {}, {40, 40, 200}};
    for (const auto& r : grun.history) {
        gs.x.push_back(r.iter);
        gs.y.push_back(r.objective);
    }
    series.push_back(gs);

    if (!skip_cmaes) {
        opt::CmaesConfig ccfg;
        ccfg.omega0 = cfg.omega0_hz * kTwoPi;
        ccfg.sigma0 = cfg.cmaes_sigma0_hz * kTwoPi;
        ccfg.budget = cfg.cmaes_budget > 0 ? cfg.cmaes_budget : grun.evals;
        ccfg.lambda = cfg.cmaes_lambda;
        ccfg.seed = cfg.cmaes_seed;
        ccfg.omega_hi = cfg.omega_max_hz * kTwoPi;
        std::cout << "CMA-ES baseline, budget " << ccfg.budget << " evaluations\n";
        t0 = now_s();
        opt::OptRun crun = opt::cmaes_baseline(objective, ccfg);
        std::cout << "cmaes: best " << crun.best_omega / kTwoPi << " Hz, objective "
                  << crun.best_objective << " (" << now_s() - t0 << " s)\n";
        save_opt_history_csv(crun, cfg.hash(), cfg.output_dir + "/opt_cmaes.csv");
        Series cs{"cmaes", {}, {}, {200, 120, 40}};
        for (const auto& r : crun.history) {
            cs.x.push_back(r.iter);
            cs.y.push_back(r.objective);
        }
        series.push_back(cs);
    }
    render_chart(series).save_ppm(cfg.output_dir + "/opt_history.ppm");
    std::cout << "wrote " << cfg.output_dir << "/opt_gradient.csv and opt_history.ppm\n";
    return 0;
}

int cmd_bench(const std::string& config_path) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fluid::SurrogateNet net = load_or_init_net(cfg, true);
    sim::EpisodeConfig ec = cfg.episode_config();

    // warmup: episode construction (factorization) + one predict step
    double t0 = now_s();
    sim::Episode ep(ec, &net);
    {
        sim::EpisodeConfig warm = ec;
        warm.steps = 1;
        sim::Episode w(warm, &net);
        (void)w.run_forward(cfg.omega0_hz * kTwoPi);
    }
    const double warmup = now_s() - t0;

    ep.timings = {};
    t0 = now_s();
    sim::Trajectory tr = ep.run_forward(cfg.omega0_hz * kTwoPi);
    const double fwd_total = now_s() - t0;

    t0 = now_s();
    auto back = ep.run_backward(cfg.omega0_hz * kTwoPi);
    const double fwd_plus_bwd = now_s() - t0;
    const double backward = std::max(fwd_plus_bwd - fwd_total, 0.0);

    std::cout.setf(std::ios::fixed);
    std::cout.precision(3);
    std::cout << "benchmark (" << ec.steps << " frames, grid " << cfg.grid.nx << "x" << cfg.grid.ny
              << ", objective " << tr.objective << ", dL/domega " << back.d_omega << ")\n";
    std::cout << "  HydroNet warmup      : " << warmup << " s\n";
    std::cout << "  Forward pass total   : " << fwd_total << " s\n";
    std::cout << "  Forward pass: solid  : " << ep.timings.solid_s << " s\n";
    std::cout << "  Forward pass: fluid  : " << ep.timings.fluid_s << " s\n";
    std::cout << "  Backward pass        : " << backward << " s\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path) {
    config::RunConfig cfg = load_config_or_exit(config_path);
    fluid::SurrogateNet net = load_or_init_net(cfg, true);
    std::cout.precision(6);
    std::cout << std::scientific;

    // case 1: p^2 at p = 3
    auto sq = [](double p) { return p * p; };
    auto sq_grad = [](double p) {
        ad::Tape t;
        ad::DiffVar x = t.leaf(Tensor::scalar(p), "p");
        return t.backward(ad::mul(t, x, x)).grad(x.node).scalar_value();
    };
    auto r1 = ad::finite_difference_check(sq, sq_grad, 3.0, 1e-5);
    std::cout << "p^2 at p=3         : ad " << r1.g_ad << "  fd " << r1.g_fd << "  rel "
              << r1.rel_err << (r1.rel_err < 1e-8 ? "  PASS" : "  FAIL") << "\n";

    // case 2: sin(p) at p = 1
    auto sn = [](double p) { return std::sin(p); };
    auto sn_grad = [](double p) {
        ad::Tape t;
        ad::DiffVar x = t.leaf(Tensor::scalar(p), "p");
        return t.backward(ad::vsin(t, x)).grad(x.node).scalar_value();
    };
    auto r2 = ad::finite_difference_check(sn, sn_grad, 1.0, 1e-6);
    std::cout << "sin(p) at p=1      : ad " << r2.g_ad << "  fd " << r2.g_fd << "  rel "
              << r2.rel_err << (r2.rel_err < 1e-7 ? "  PASS" : "  FAIL") << "\n";

    // case 3: 10-step coupled mini-episode wrt omega
    sim::EpisodeConfig ec = cfg.episode_config();
    ec.steps = 10;
    ec.burn_in = 4;
    sim::Episode ep(ec, &net);
    auto ep_val = [&](double w) { return ep.run_forward(w).objective; };
    auto ep_grad = [&](double w) { return ep.run_backward(w).d_omega; };
    const double omega = cfg.omega0_hz * kTwoPi;
    const double tol = cfg.net.f32_emulation ? 1e-2 : 1e-3;
    auto r3 = ad::finite_difference_check(ep_val, ep_grad, omega, 1e-4 * omega);
    std::cout << "10-step episode    : ad " << r3.g_ad << "  fd " << r3.g_fd << "  rel "
              << r3.rel_err << (r3.rel_err < tol ? "  PASS" : "  FAIL") << "\n";

    bool ok = r1.rel_err < 1e-8 && r2.rel_err < 1e-7 && r3.rel_err < tol;
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finflow: differentiable fluid-structure simulation for soft swimmers"};
    app.require_subcommand(1);

    std::string config_path = "configs/default.json";
    std::uint64_t seed_override = 0;
    std::string out_override;
    double omega_hz = 0.0;
    int snapshot_every = 0;
    bool snapshot_csv = false;
    bool skip_cmaes = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file");
        cmd->add_option("--seed", seed_override, "override the config seed");
        cmd->add_option("--out", out_override, "override the output directory");
    };

    CLI::App* train = app.add_subcommand("train-fluid", "train the hydrodynamics surrogate");
    add_common(train);
    CLI::App* simulate = app.add_subcommand("simulate", "run one swimming episode");
    add_common(simulate);
    simulate->add_option("--omega-hz", omega_hz, "controller frequency in Hz");
    simulate->add_option("--snapshot-every", snapshot_every, "dump fields every k steps (0 = off)");
    simulate->add_flag("--snapshot-csv", snapshot_csv, "write CSV snapshots instead of binary");
    CLI::App* sweep = app.add_subcommand("sweep", "frequency sweep of forward episodes");
    add_common(sweep);
    CLI::App* optimize = app.add_subcommand("optimize", "gradient frequency optimization + CMA-ES baseline");
    add_common(optimize);
    optimize->add_flag("--skip-cmaes", skip_cmaes, "skip the CMA-ES baseline");
    CLI::App* bench = app.add_subcommand("bench", "runtime breakdown of one episode");
    add_common(bench);
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient report");
    add_common(gradcheck);

    CLI11_PARSE(app, argc, argv);

    g_seed_override = seed_override;
    g_out_override = out_override;

    try {
        if (train->parsed()) return cmd_train_fluid(config_path);
        if (simulate->parsed()) return cmd_simulate(config_path, omega_hz, snapshot_every, snapshot_csv);
        if (sweep->parsed()) return cmd_sweep(config_path);
        if (optimize->parsed()) return cmd_optimize(config_path, skip_cmaes);
        if (bench->parsed()) return cmd_bench(config_path);
        if (gradcheck->parsed()) return cmd_gradcheck(config_path);
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
