#pragma once

#include "finflow/couple/boundary.hpp"
#include "finflow/fluid/mac_grid.hpp"

namespace finflow::fluid {

struct FluidParams {
    double rho = 50.0;      // kg/m^3
    double mu = 1.25e-4;    // Pa s
    double beta = 1.0;      // momentum-residual weight
    double gamma_loss = 20.0; // boundary-velocity weight
    double unit_rescale = 0.0; // residual scale factor; 0 selects 1/dx

    double rescale_for(const MacGrid& g) const {
        return unit_rescale > 0.0 ? unit_rescale : 1.0 / g.dx;
    }
    void validate() const {
        check(rho > 0.0 && mu >= 0.0, "FluidParams: rho must be positive, mu non-negative");
        check(beta > 0.0 && gamma_loss > 0.0, "FluidParams: loss weights must be positive");
    }
};

struct ResidualLoss {
    ad::DiffVar total; // beta Lp + gamma Lb
    ad::DiffVar lp;    // (1-b)-weighted mean squared momentum residual
    ad::DiffVar lb;    // b-weighted mean squared velocity mismatch
};

// Navier-Stokes residual loss between consecutive states. Time derivative is
// (v_{t+1}-v_t)/h; advection, pressure gradient and Laplacian are centered
// stencils evaluated at t+1 on interior faces; every residual term is
// multiplied by the unit rescale factor before squaring.
ResidualLoss ns_residual_loss(ad::Tape& t, const FluidStateVar& s_t, const FluidStateVar& s_t1,
                              const couple::BoundaryVar& bc, const FluidParams& fp,
                              const MacGrid& grid);

} // namespace finflow::fluid
