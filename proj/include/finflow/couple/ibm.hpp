#pragma once

#include "finflow/couple/boundary.hpp"

namespace finflow::couple {

// Per-surface-element geometry on the tape: vertex positions, renormalized
// average-of-adjacent-edge normals, half-edge-sum lengths, and the raw
// perpendicular edge vectors (which telescope to zero around a closed loop).
struct SurfaceGeometryVar {
    ad::DiffVar points;    // (1,K,2)
    ad::DiffVar normals;   // (1,K,2), unit
    ad::DiffVar lengths;   // (1,K,1)
    ad::DiffVar edge_perp; // (1,K,2), perp(q_{k+1}-q_k), |.| = edge length
};

struct SurfaceForcesVar {
    ad::DiffVar f_k;     // (1,K,2), N
    ad::DiffVar f_total; // (1,1,2), N
};

// Gaussian-weighted mean of a cell field at each surface element:
// sum_ij field_ij w_ij / Z_k with w_ij = exp(-|x_ij - q_k|^2 / (2 sigma')) b_ij.
// Z_k underflow is a hard error naming the element (body left the grid).
ad::DiffVar ibm_sample(ad::Tape& t, const ad::DiffVar& field_cells, const ad::DiffVar& b_cells,
                       const SurfaceGeometryVar& geo, const Tensor& centers, double sigma_prime);

// f_k = -l_k n_k <p>_k
SurfaceForcesVar ibm_surface_forces(ad::Tape& t, const ad::DiffVar& p_cells,
                                    const ad::DiffVar& b_cells, const SurfaceGeometryVar& geo,
                                    const Tensor& centers, double sigma_prime);

// f_k = -l_k mu <a>_k t_k with t = (n_y, -n_x); off by default (water-like mu
// makes it negligible next to the pressure force)
ad::DiffVar viscous_surface_forces(ad::Tape& t, const ad::DiffVar& a_corner,
                                   const ad::DiffVar& b_cells, const SurfaceGeometryVar& geo,
                                   const fluid::MacGrid& grid, const Tensor& centers,
                                   double sigma_prime, double mu);

// thrust aggregation: sum, and either one averaged vector applied to every
// mesh node or the per-surface forces scattered onto their own nodes
ad::DiffVar aggregate_average_force(ad::Tape& t, const ad::DiffVar& f_total, int n_nodes);

} // namespace finflow::couple
