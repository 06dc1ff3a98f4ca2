#include "finflow/config/run_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace finflow::config {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw SimError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw SimError(std::string("config: parse error: ") + e.what());
    }
    RunConfig cfg;
    reject_unknown(doc, {"seed", "output_dir", "grid", "fluid", "softness", "swimmer", "material",
                         "episode", "net", "training", "optimizer", "sweep"},
                   "the top level");
    get_to(doc, "seed", cfg.seed);
    get_to(doc, "output_dir", cfg.output_dir);

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        reject_unknown(g, {"nx", "ny", "dx", "dt"}, "grid");
        get_to(g, "nx", cfg.grid.nx);
        get_to(g, "ny", cfg.grid.ny);
        get_to(g, "dx", cfg.grid.dx);
        get_to(g, "dt", cfg.grid.dt);
    }
    if (doc.contains("fluid")) {
        const json& f = doc["fluid"];
        reject_unknown(f, {"rho", "mu", "beta", "gamma_loss", "unit_rescale"}, "fluid");
        get_to(f, "rho", cfg.fluid_params.rho);
        get_to(f, "mu", cfg.fluid_params.mu);
        get_to(f, "beta", cfg.fluid_params.beta);
        get_to(f, "gamma_loss", cfg.fluid_params.gamma_loss);
        get_to(f, "unit_rescale", cfg.fluid_params.unit_rescale);
    }
    if (doc.contains("softness")) {
        const json& s = doc["softness"];
        reject_unknown(s, {"sigma", "xi", "tau", "sigma_prime"}, "softness");
        get_to(s, "sigma", cfg.softness.sigma);
        get_to(s, "xi", cfg.softness.xi);
        get_to(s, "tau", cfg.softness.tau);
        get_to(s, "sigma_prime", cfg.softness.sigma_prime);
    }
    if (doc.contains("swimmer")) {
        const json& s = doc["swimmer"];
        reject_unknown(s, {"length", "profile", "min_halfwidth_frac", "res_x", "res_y", "actuation"},
                       "swimmer");
        get_to(s, "length", cfg.swimmer.length);
        if (s.contains("profile")) {
            auto v = s.at("profile").get<std::vector<double>>();
            check(v.size() == 4, "config: swimmer.profile needs 4 coefficients");
            for (int i = 0; i < 4; ++i) cfg.swimmer.profile[std::size_t(i)] = v[std::size_t(i)];
        }
        get_to(s, "min_halfwidth_frac", cfg.swimmer.min_halfwidth_frac);
        get_to(s, "res_x", cfg.swimmer.res_x);
        get_to(s, "res_y", cfg.swimmer.res_y);
        if (s.contains("actuation")) {
            const json& a = s["actuation"];
            reject_unknown(a, {"amplitude_c", "wave_number", "activation_time"},
                           "swimmer.actuation");
            get_to(a, "amplitude_c", cfg.swimmer.act.amplitude_c);
            get_to(a, "wave_number", cfg.swimmer.act.wave_number);
            get_to(a, "activation_time", cfg.swimmer.act.activation_time);
        }
    }
    if (doc.contains("material")) {
        const json& m = doc["material"];
        reject_unknown(m, {"youngs", "poisson", "density"}, "material");
        get_to(m, "youngs", cfg.material.youngs);
        get_to(m, "poisson", cfg.material.poisson);
        get_to(m, "density", cfg.material.density);
    }
    if (doc.contains("episode")) {
        const json& e = doc["episode"];
        reject_unknown(e,
                       {"steps", "burn_in", "x_axis_lock", "force_mode", "viscous_forces",
                        "solver_iters", "solver_damping", "rayleigh_damping", "checkpoint_segment",
                        "start_x_frac"},
                       "episode");
        get_to(e, "steps", cfg.steps);
        get_to(e, "burn_in", cfg.burn_in);
        get_to(e, "x_axis_lock", cfg.x_axis_lock);
        if (e.contains("force_mode")) {
            std::string m = e.at("force_mode").get<std::string>();
            if (m == "averaged")
                cfg.force_mode = sim::ForceMode::Averaged;
            else if (m == "per_surface")
                cfg.force_mode = sim::ForceMode::PerSurface;
            else
                throw SimError("config: episode.force_mode must be 'averaged' or 'per_surface'");
        }
        get_to(e, "viscous_forces", cfg.viscous_forces);
        get_to(e, "solver_iters", cfg.solver_iters);
        get_to(e, "solver_damping", cfg.solver_damping);
        get_to(e, "rayleigh_damping", cfg.rayleigh_damping);
        get_to(e, "checkpoint_segment", cfg.checkpoint_segment);
        get_to(e, "start_x_frac", cfg.start_x_frac);
    }
    if (doc.contains("net")) {
        const json& n = doc["net"];
        reject_unknown(n,
                       {"base", "levels", "padding", "in_scale_a", "in_scale_p", "in_scale_v",
                        "precision", "weights"},
                       "net");
        get_to(n, "base", cfg.net.base);
        get_to(n, "levels", cfg.net.levels);
        if (n.contains("padding")) {
            std::string p = n.at("padding").get<std::string>();
            if (p == "zero")
                cfg.net.pad = kern::Pad::Zero;
            else if (p == "periodic")
                cfg.net.pad = kern::Pad::Periodic;
            else
                throw SimError("config: net.padding must be 'zero' or 'periodic'");
        }
        get_to(n, "in_scale_a", cfg.net.in_scale_a);
        get_to(n, "in_scale_p", cfg.net.in_scale_p);
        get_to(n, "in_scale_v", cfg.net.in_scale_v);
        if (n.contains("precision")) {
            std::string p = n.at("precision").get<std::string>();
            if (p == "f64")
                cfg.net.f32_emulation = false;
            else if (p == "f32")
                cfg.net.f32_emulation = true;
            else
                throw SimError("config: net.precision must be 'f64' or 'f32'");
        }
        get_to(n, "weights", cfg.weights_path);
    }
    if (doc.contains("training")) {
        const json& t = doc["training"];
        reject_unknown(t,
                       {"iterations", "batch", "pool_size", "lr", "reset_prob", "env_frames",
                        "speed_lo", "speed_hi", "rho_lo", "rho_hi", "mu_lo", "mu_hi", "log_every"},
                       "training");
        get_to(t, "iterations", cfg.train_iterations);
        get_to(t, "batch", cfg.train_batch);
        get_to(t, "pool_size", cfg.train_pool);
        get_to(t, "lr", cfg.train_lr);
        get_to(t, "reset_prob", cfg.train_reset_prob);
        get_to(t, "env_frames", cfg.env_frames);
        get_to(t, "speed_lo", cfg.env_speed_lo);
        get_to(t, "speed_hi", cfg.env_speed_hi);
        get_to(t, "rho_lo", cfg.rho_lo);
        get_to(t, "rho_hi", cfg.rho_hi);
        get_to(t, "mu_lo", cfg.mu_lo);
        get_to(t, "mu_hi", cfg.mu_hi);
        get_to(t, "log_every", cfg.train_log_every);
    }
    if (doc.contains("optimizer")) {
        const json& o = doc["optimizer"];
        reject_unknown(o,
                       {"omega0_hz", "iters", "lr", "omega_max_hz", "max_retries", "cmaes_sigma0_hz",
                        "cmaes_budget", "cmaes_lambda", "cmaes_seed"},
                       "optimizer");
        get_to(o, "omega0_hz", cfg.omega0_hz);
        get_to(o, "iters", cfg.opt_iters);
        get_to(o, "lr", cfg.opt_lr);
        get_to(o, "omega_max_hz", cfg.omega_max_hz);
        get_to(o, "max_retries", cfg.opt_max_retries);
        get_to(o, "cmaes_sigma0_hz", cfg.cmaes_sigma0_hz);
        get_to(o, "cmaes_budget", cfg.cmaes_budget);
        get_to(o, "cmaes_lambda", cfg.cmaes_lambda);
        get_to(o, "cmaes_seed", cfg.cmaes_seed);
    }
    if (doc.contains("sweep")) {
        const json& s = doc["sweep"];
        reject_unknown(s, {"frequencies_hz", "steps"}, "sweep");
        get_to(s, "frequencies_hz", cfg.sweep_frequencies_hz);
        get_to(s, "steps", cfg.sweep_steps);
    }

    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw SimError("config file not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

void RunConfig::validate() const {
    grid.validate();
    fluid_params.validate();
    check(fluid_params.rho >= 10.0 && fluid_params.rho <= 50.0,
          "config: fluid.rho outside the trained operating range [10, 50] kg/m^3");
    check(fluid_params.mu >= 1.25e-4 && fluid_params.mu <= 1e-3,
          "config: fluid.mu outside the trained operating range [1.25e-4, 1e-3] Pa s");
    softness.validate();
    swimmer.validate();
    material.validate();
    check(steps >= 1 && burn_in >= 0, "config: episode.steps must be >= 1, burn_in >= 0");
    check(solver_iters >= 1, "config: episode.solver_iters must be >= 1");
    check(checkpoint_segment >= 1, "config: episode.checkpoint_segment must be >= 1");
    check(train_iterations >= 0 && train_batch >= 1 && train_pool >= 1,
          "config: bad training sizes");
    check(omega0_hz > 0 && omega_max_hz > omega0_hz * 0.0, "config: optimizer frequencies");
    check(!sweep_frequencies_hz.empty(), "config: sweep.frequencies_hz must be non-empty");
}

std::string RunConfig::canonical_json() const {
    json doc;
    doc["seed"] = seed;
    doc["output_dir"] = output_dir;
    doc["grid"] = {{"nx", grid.nx}, {"ny", grid.ny}, {"dx", grid.dx}, {"dt", grid.dt}};
    doc["fluid"] = {{"rho", fluid_params.rho},
                    {"mu", fluid_params.mu},
                    {"beta", fluid_params.beta},
                    {"gamma_loss", fluid_params.gamma_loss},
                    {"unit_rescale", fluid_params.unit_rescale}};
    doc["softness"] = {{"sigma", softness.sigma},
                       {"xi", softness.xi},
                       {"tau", softness.tau},
                       {"sigma_prime", softness.sigma_prime}};
    doc["swimmer"] = {{"length", swimmer.length},
                      {"profile", swimmer.profile},
                      {"min_halfwidth_frac", swimmer.min_halfwidth_frac},
                      {"res_x", swimmer.res_x},
                      {"res_y", swimmer.res_y},
                      {"actuation",
                       {{"amplitude_c", swimmer.act.amplitude_c},
                        {"wave_number", swimmer.act.wave_number},
                        {"activation_time", swimmer.act.activation_time}}}};
    doc["material"] = {{"youngs", material.youngs},
                       {"poisson", material.poisson},
                       {"density", material.density}};
    doc["episode"] = {{"steps", steps},
                      {"burn_in", burn_in},
                      {"x_axis_lock", x_axis_lock},
                      {"force_mode", force_mode == sim::ForceMode::Averaged ? "averaged" : "per_surface"},
                      {"viscous_forces", viscous_forces},
                      {"solver_iters", solver_iters},
                      {"solver_damping", solver_damping},
                      {"rayleigh_damping", rayleigh_damping},
                      {"checkpoint_segment", checkpoint_segment},
                      {"start_x_frac", start_x_frac}};
    doc["net"] = {{"base", net.base},
                  {"levels", net.levels},
                  {"padding", net.pad == kern::Pad::Periodic ? "periodic" : "zero"},
                  {"in_scale_a", net.in_scale_a},
                  {"in_scale_p", net.in_scale_p},
                  {"in_scale_v", net.in_scale_v},
                  {"precision", net.f32_emulation ? "f32" : "f64"},
                  {"weights", weights_path}};
    doc["training"] = {{"iterations", train_iterations},
                       {"batch", train_batch},
                       {"pool_size", train_pool},
                       {"lr", train_lr},
                       {"reset_prob", train_reset_prob},
                       {"env_frames", env_frames},
                       {"speed_lo", env_speed_lo},
                       {"speed_hi", env_speed_hi},
                       {"rho_lo", rho_lo},
                       {"rho_hi", rho_hi},
                       {"mu_lo", mu_lo},
                       {"mu_hi", mu_hi},
                       {"log_every", train_log_every}};
    doc["optimizer"] = {{"omega0_hz", omega0_hz},
                        {"iters", opt_iters},
                        {"lr", opt_lr},
                        {"omega_max_hz", omega_max_hz},
                        {"max_retries", opt_max_retries},
                        {"cmaes_sigma0_hz", cmaes_sigma0_hz},
                        {"cmaes_budget", cmaes_budget},
                        {"cmaes_lambda", cmaes_lambda},
                        {"cmaes_seed", cmaes_seed}};
    doc["sweep"] = {{"frequencies_hz", sweep_frequencies_hz}, {"steps", sweep_steps}};
    return doc.dump(2);
}

std::string RunConfig::hash() const {
    const std::string text = canonical_json();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

sim::EpisodeConfig RunConfig::episode_config() const {
    sim::EpisodeConfig e;
    e.grid = grid;
    e.fluid_params = fluid_params;
    e.softness = softness;
    e.swimmer = swimmer;
    e.material = material;
    e.steps = steps;
    e.burn_in = burn_in;
    e.x_axis_lock = x_axis_lock;
    e.force_mode = force_mode;
    e.viscous_forces = viscous_forces;
    e.solver_iters = solver_iters;
    e.solver_damping = solver_damping;
    e.rayleigh_damping = rayleigh_damping;
    e.checkpoint_segment = checkpoint_segment;
    e.start_x_frac = start_x_frac;
    return e;
}

fluid::TrainerConfig RunConfig::trainer_config() const {
    fluid::TrainerConfig t;
    t.grid = grid;
    t.fp = fluid_params;
    t.rho_lo = rho_lo;
    t.rho_hi = rho_hi;
    t.mu_lo = mu_lo;
    t.mu_hi = mu_hi;
    t.iterations = train_iterations;
    t.batch = train_batch;
    t.pool_size = train_pool;
    t.lr = train_lr;
    t.seed = seed;
    t.reset_prob = train_reset_prob;
    t.env.frames = env_frames;
    t.env.speed_lo = env_speed_lo;
    t.env.speed_hi = env_speed_hi;
    t.log_every = train_log_every;
    return t;
}

} // namespace finflow::config
