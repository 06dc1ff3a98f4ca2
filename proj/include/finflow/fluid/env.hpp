#pragma once

#include "finflow/couple/boundary.hpp"
#include "finflow/fluid/mac_grid.hpp"

#include <cstdint>
#include <vector>

namespace finflow::fluid {

struct EnvOptions {
    double speed_lo = 0.05; // m/s, sampled obstacle/belt speeds
    double speed_hi = 0.25;
    int frames = 96;
    double mask_sigma = 5e-7; // rasterization softness for obstacle masks
};

// Boundary condition of one training frame, cell-centered plus staggered.
struct EnvFrame {
    Tensor b, vdx_c, vdy_c; // (1,ny,nx)
    Tensor vdx, vdy;        // faces
};

// Randomized boundary-condition episodes: box walls (still, or a moving-belt
// ring whose speed emulates ambient flow), plus 1-3 rigidly moving obstacles
// (ellipses and swimmer-like profiles) rasterized through the same soft-mask
// machinery the coupling layer uses. Deterministic given the seed.
class TrainingEnv {
public:
    TrainingEnv(std::uint64_t seed, const MacGrid& grid, const EnvOptions& opt = {});

    int frames() const { return opt_.frames; }
    int obstacle_count() const { return int(obstacles_.size()); }
    double belt_speed() const { return belt_speed_; }
    EnvFrame frame(int t) const;

private:
    struct Obstacle {
        Tensor shape;        // (1,K,2) polygon around origin
        double cx, cy;       // base center
        double amp_x, amp_y; // motion amplitudes
        double om_x, om_y;   // motion angular frequencies, rad/s
        double ph_x, ph_y;   // phases
        double spin;         // rad/s
    };

    MacGrid grid_;
    EnvOptions opt_;
    std::vector<Obstacle> obstacles_;
    double belt_speed_ = 0.0; // 0 = still walls
    Tensor centers_;
};

} // namespace finflow::fluid
