#pragma once

#include "finflow/ad/ops.hpp"
#include "finflow/core/cholesky.hpp"
#include "finflow/solid/mesh.hpp"

namespace finflow::solid {

struct SolidStateVar {
    ad::DiffVar q;    // (1,N,2) positions, m
    ad::DiffVar qdot; // (1,N,2) velocities, m/s
};

// Precomputed quantities for one (mesh, material, dt) combination: inverse
// rest-shape matrices, lumped masses, and the projective-dynamics global
// matrix M/h^2 + sum_e 2(mu+lambda) A_e G_e^T G_e factored once. Fixed
// quasi-Newton iterations with this matrix and the exact co-rotated force
// reproduce the PD local-global scheme.
class FemSystem {
public:
    // rayleigh: mass-proportional velocity damping coefficient (1/s), 0 = off
    FemSystem(const Mesh& mesh, const Material& mat, double dt, double rayleigh = 0.0);

    const Mesh& mesh() const { return *mesh_; }
    const Material& material() const { return mat_; }
    double dt() const { return dt_; }
    const Chol& hessian() const { return hess_; }
    const Tensor& mass2() const { return mass2_; } // (1,N,2) lumped mass per component
    double mass_total() const { return mass_total_; }

    // map a per-actuated-element signal onto all elements (zeros elsewhere)
    ad::DiffVar expand_actuation(ad::Tape& t, const ad::DiffVar& h_act) const;

    // co-rotated internal forces, -dE/dq; hard error on element inversion
    ad::DiffVar elastic_force(ad::Tape& t, const ad::DiffVar& q, const ad::DiffVar& h_act) const;
    ad::DiffVar elastic_energy(ad::Tape& t, const ad::DiffVar& q, const ad::DiffVar& h_act) const;

    // fixed-iteration damped quasi-Newton implicit Euler step; differentiable
    // by unrolling the iterations on the tape. residual_out (optional)
    // receives the final residual max-norm for convergence warnings.
    SolidStateVar implicit_step(ad::Tape& t, const SolidStateVar& s, const ad::DiffVar& f_ext,
                                const ad::DiffVar& h_act, int iters, double damping = 1.0,
                                double* residual_out = nullptr) const;

private:
    struct ElemVars; // per-element tape intermediates
    ElemVars deformation(ad::Tape& t, const ad::DiffVar& q, const ad::DiffVar& h_act) const;

    const Mesh* mesh_;
    Material mat_;
    double dt_;
    double rayleigh_;
    std::vector<int> idx0_, idx1_, idx2_;
    Tensor dminv_[4]; // (1,E,1) each: rest Dm^{-1} entries m00,m01,m10,m11
    Tensor area_;     // (1,E,1)
    Tensor mass2_;
    double mass_total_;
    Chol hess_;
};

} // namespace finflow::solid
