#pragma once

#include "finflow/couple/boundary.hpp"
#include "finflow/fluid/mac_grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace finflow::fluid {

// Encoder-decoder with skip connections and limited channel widths
// (base, 2x, 4x), 3x3 convs, SiLU, average-pool down, bilinear up. Input
// channels: curl, pressure, mask, boundary velocity x/y (normalized by the
// in_scale factors); output: curl update and next pressure.
struct UNetConfig {
    int base = 20;
    int levels = 3; // 1..3 encoder depths; grid dims must divide 2^(levels-1)
    kern::Pad pad = kern::Pad::Zero;
    double in_scale_a = 250.0;
    double in_scale_p = 0.4;
    double in_scale_v = 5.0;
    bool f32_emulation = false; // round layer outputs to f32 storage precision
};

class SurrogateNet {
public:
    SurrogateNet() = default;
    SurrogateNet(UNetConfig cfg, std::uint64_t seed);

    const UNetConfig& config() const { return cfg_; }
    std::vector<Tensor>& weights() { return weights_; }
    const std::vector<Tensor>& weights() const { return weights_; }
    std::size_t param_count() const;

    // weight variables for one tape: leaves when training, constants during
    // episode rollouts (no weight gradients are then computed)
    std::vector<ad::DiffVar> weight_vars(ad::Tape& t, bool as_leaves) const;

    // (5,ny,nx) -> (2,ny,nx); spatial dims must be divisible by 4
    ad::DiffVar forward(ad::Tape& t, const ad::DiffVar& input,
                        const std::vector<ad::DiffVar>& w) const;

    // versioned flat binary: magic, json layer manifest, little-endian f32 data
    void save(const std::string& path) const;
    static SurrogateNet load(const std::string& path);

private:
    UNetConfig cfg_;
    std::vector<Tensor> weights_; // w0,b0,w1,b1,... (11 conv layers)
};

// One surrogate time step: assembles input channels from (state, bc), runs
// the net, re-pins the curl wall ring and mean-normalizes pressure over
// fluid cells (b < 0.5). Differentiable wrt state, bc and weights.
FluidStateVar predict_step(ad::Tape& t, const SurrogateNet& net,
                           const std::vector<ad::DiffVar>& w, const FluidStateVar& state,
                           const couple::BoundaryVar& bc, const MacGrid& grid);

} // namespace finflow::fluid
