#pragma once

#include "finflow/ad/ops.hpp"
#include "finflow/fluid/mac_grid.hpp"

namespace finflow::couple {

struct SoftnessParams {
    double sigma = 5e-7;       // mask sharpness, m^2
    double xi = 5e-7;          // mask softmin temperature, m^2
    double tau = 5e-7;         // velocity softmin temperature, m^2
    double sigma_prime = 0.0;  // IBM Gaussian variance, m^2; 0 = default 2 dx^2

    double sigma_prime_for(const fluid::MacGrid& g) const {
        return sigma_prime > 0.0 ? sigma_prime : 2.0 * g.dx * g.dx;
    }
    void validate() const {
        check(sigma > 0 && xi > 0 && tau > 0 && sigma_prime >= 0,
              "SoftnessParams: softness values must be positive");
    }
};

// soft occupancy mask + boundary velocities, both cell-centered and staggered
struct BoundaryVar {
    ad::DiffVar b;            // (1,ny,nx) in [0,1]
    ad::DiffVar vdx, vdy;     // face fields (1,ny,nx+1), (1,ny+1,nx)
    ad::DiffVar vdx_c, vdy_c; // cell-centered (net input channels)
};

// +1 inside / -1 outside by even-odd ray crossing with half-open edge
// intervals; plain values (the sign field is piecewise constant in q)
Tensor inside_delta(const Tensor& q_surf, const Tensor& centers);

// b_ij = sigmoid(delta_ij * softmin-weighted squared distance / sigma)
ad::DiffVar soft_boundary_mask(ad::Tape& t, const ad::DiffVar& q_surf, const Tensor& centers,
                               const fluid::MacGrid& grid, const SoftnessParams& sp);

// full solid->fluid boundary condition from surface positions and velocities
BoundaryVar boundary_condition(ad::Tape& t, const ad::DiffVar& q_surf, const ad::DiffVar& qdot_surf,
                               const Tensor& centers, const fluid::MacGrid& grid,
                               const SoftnessParams& sp);

} // namespace finflow::couple
