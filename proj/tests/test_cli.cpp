#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "finflow/config/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

using namespace finflow;
using namespace finflow::config;

namespace {
// ctest runs from build/tests; a direct run may sit in build/
std::string find_cli() {
    for (const char* p : {"../tools/finflow", "tools/finflow", "./finflow"}) {
        std::ifstream probe(p);
        if (probe.good()) return p;
    }
    return "";
}
} // namespace

TEST_CASE("empty config yields documented defaults") {
    RunConfig cfg = RunConfig::from_json_text("{}");
    CHECK(cfg.grid.nx == 300);
    CHECK(cfg.grid.ny == 100);
    CHECK(cfg.grid.dx == doctest::Approx(2.5e-3));
    CHECK(cfg.fluid_params.rho == doctest::Approx(50.0));
    CHECK(cfg.fluid_params.mu == doctest::Approx(1.25e-4));
    CHECK(cfg.fluid_params.gamma_loss == doctest::Approx(20.0));
    CHECK(cfg.softness.sigma == doctest::Approx(5e-7));
    CHECK(cfg.swimmer.length == doctest::Approx(0.2));
    CHECK(cfg.material.youngs == doctest::Approx(6e5));
    CHECK(cfg.steps == 500);
    CHECK(cfg.burn_in == 50);
    CHECK(cfg.x_axis_lock);
    CHECK(cfg.net.base == 20);
    CHECK(cfg.omega0_hz == doctest::Approx(2.0));
    CHECK(cfg.sweep_frequencies_hz == std::vector<double>{3, 4, 5, 6, 7});
    // rescale default is 1/dx = 400 at the default grid
    CHECK(cfg.fluid_params.rescale_for(cfg.grid) == doctest::Approx(400.0));
}

TEST_CASE("unknown keys are rejected with a naming message") {
    try {
        (void)RunConfig::from_json_text(R"({"grid": {"nx": 32, "weird": 1}})");
        FAIL("expected rejection");
    } catch (const SimError& e) {
        CHECK(std::string(e.what()).find("weird") != std::string::npos);
    }
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"nonsense": {}})"), SimError);
    CHECK_THROWS_AS((void)RunConfig::from_json_text("not json at all"), SimError);
}

TEST_CASE("operating-range and shape validation") {
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"fluid": {"rho": 500.0}})"), SimError);
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"fluid": {"mu": 1e-6}})"), SimError);
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"grid": {"nx": 4}})"), SimError);
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"episode": {"force_mode": "noodle"}})"),
                    SimError);
    CHECK_THROWS_AS((void)RunConfig::from_json_text(R"({"swimmer": {"profile": [1, 2]}})"),
                    SimError);
}

TEST_CASE("config hash is stable and sensitive") {
    RunConfig a = RunConfig::from_json_text("{}");
    RunConfig b = RunConfig::from_json_text("{}");
    CHECK(a.hash() == b.hash());
    RunConfig c = RunConfig::from_json_text(R"({"seed": 2})");
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
}

TEST_CASE("cli: missing config file exits 2 and names the path") {
    std::string exe = find_cli();
    if (exe.empty()) {
        MESSAGE("finflow binary not found next to test; skipping subprocess checks");
        return;
    }
    int rc = std::system((exe + " simulate --config /nonexistent/conf.json "
                          "> cli_out.txt 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    std::ifstream f("cli_out.txt");
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(all.find("/nonexistent/conf.json") != std::string::npos);
    std::remove("cli_out.txt");
}

TEST_CASE("cli: zero-iteration training writes initial weights and a headered csv") {
    std::string exe = find_cli();
    if (exe.empty()) return;
    std::ofstream cfg("cli_cfg.json");
    cfg << R"({
        "output_dir": "cli_out_dir",
        "grid": {"nx": 16, "ny": 8, "dx": 5e-3},
        "net": {"base": 4, "levels": 2, "weights": "cli_out_dir/w.ffnw"},
        "training": {"iterations": 0},
        "swimmer": {"length": 0.02, "res_x": 8, "res_y": 4}
    })";
    cfg.close();
    int rc = std::system((exe + " train-fluid --config cli_cfg.json > cli_out.txt 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 0);
    std::ifstream w("cli_out_dir/w.ffnw", std::ios::binary);
    CHECK(w.good());
    std::ifstream h("cli_out_dir/loss_history.csv");
    std::string line;
    std::getline(h, line);
    CHECK(line == "iteration,L_p,L_b,L");
    std::remove("cli_cfg.json");
    std::remove("cli_out.txt");
    (void)!std::system("rm -rf cli_out_dir");
}
