#include "finflow/solid/fem.hpp"

#include <cmath>
#include <string>

namespace finflow::solid {

using namespace ad;

namespace {

// Projective-dynamics global matrix: M/h^2 + sum_e w_e G_e^T G_e where G_e
// maps nodal positions to vec(F_e) and w_e = 2 (mu + lambda) A_e. With the
// exact co-rotated force on the right-hand side this quasi-Newton iteration
// is the PD local-global step: rotations are absorbed by the force (local)
// term instead of being fought by the matrix, and the weight majorizes both
// energy terms, which keeps the fixed-iteration solve contractive. A frozen
// rest-state tangent stiffness instead diverges through the rotation modes.
void assemble_pd_gram(const Mesh& mesh, const Material& mat,
                      const std::vector<Tensor>& dminv, std::vector<double>& k, int ndof) {
    const double w_mat = 2.0 * (mat.mu_s() + mat.lambda_s());
    for (std::size_t e = 0; e < mesh.tris.size(); ++e) {
        const auto& tr = mesh.tris[e];
        const double b00 = dminv[0].data()[e], b01 = dminv[1].data()[e];
        const double b10 = dminv[2].data()[e], b11 = dminv[3].data()[e];
        // per-coordinate gradients of the two F entries living on that axis
        const double g1[3] = {-(b00 + b10), b00, b10};
        const double g2[3] = {-(b01 + b11), b01, b11};
        const double w = w_mat * mesh.rest_area[e];
        double s[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) s[r][c] = w * (g1[r] * g1[c] + g2[r] * g2[c]);
        for (int axis = 0; axis < 2; ++axis) {
            const int dof[3] = {2 * tr[0] + axis, 2 * tr[1] + axis, 2 * tr[2] + axis};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) k[std::size_t(dof[r]) * ndof + dof[c]] += s[r][c];
        }
    }
}

} // namespace

FemSystem::FemSystem(const Mesh& mesh, const Material& mat, double dt, double rayleigh)
    : mesh_(&mesh), mat_(mat), dt_(dt), rayleigh_(rayleigh) {
    mesh.validate();
    mat.validate();
    check(dt > 0.0, "FemSystem: dt must be positive");
    check(rayleigh >= 0.0, "FemSystem: damping coefficient must be non-negative");
    const int e = mesh.n_tris(), n = mesh.n_nodes();

    idx0_.reserve(e);
    idx1_.reserve(e);
    idx2_.reserve(e);
    for (const auto& tr : mesh.tris) {
        idx0_.push_back(tr[0]);
        idx1_.push_back(tr[1]);
        idx2_.push_back(tr[2]);
    }

    for (auto& t : dminv_) t = Tensor::uninit({1, e, 1});
    area_ = Tensor::uninit({1, e, 1});
    const double* p = mesh.rest.data();
    for (int i = 0; i < e; ++i) {
        const auto& tr = mesh.tris[std::size_t(i)];
        double d1x = p[2 * tr[1]] - p[2 * tr[0]], d1y = p[2 * tr[1] + 1] - p[2 * tr[0] + 1];
        double d2x = p[2 * tr[2]] - p[2 * tr[0]], d2y = p[2 * tr[2] + 1] - p[2 * tr[0] + 1];
        double det = d1x * d2y - d2x * d1y;
        check(det > 0.0, "FemSystem: inverted rest element " + std::to_string(i));
        dminv_[0].raw()[i] = d2y / det;
        dminv_[1].raw()[i] = -d2x / det;
        dminv_[2].raw()[i] = -d1y / det;
        dminv_[3].raw()[i] = d1x / det;
        area_.raw()[i] = mesh.rest_area[std::size_t(i)];
    }

    auto masses = mesh.lumped_mass(mat.density);
    mass2_ = Tensor::uninit({1, n, 2});
    mass_total_ = 0.0;
    for (int i = 0; i < n; ++i) {
        mass2_.raw()[2 * i] = masses[std::size_t(i)];
        mass2_.raw()[2 * i + 1] = masses[std::size_t(i)];
        mass_total_ += masses[std::size_t(i)];
    }

    const int ndof = 2 * n;
    std::vector<double> k(std::size_t(ndof) * ndof, 0.0);
    std::vector<Tensor> dmv(dminv_, dminv_ + 4);
    assemble_pd_gram(mesh, mat, dmv, k, ndof);
    const double inv_h2 = 1.0 / (dt * dt);
    for (int i = 0; i < ndof; ++i)
        k[std::size_t(i) * ndof + i] += mass2_.data()[i] * (inv_h2 + rayleigh / dt);
    hess_ = Chol::factor(k, ndof);
}

DiffVar FemSystem::expand_actuation(Tape& t, const DiffVar& h_act) const {
    const int e = mesh_->n_tris();
    if (!h_act.val.defined() || mesh_->actuated.empty())
        return constant(Tensor::zeros({1, e, 1}));
    check(h_act.shape().h == int(mesh_->actuated.size()) && h_act.shape().w == 1,
          "expand_actuation: signal shape does not match actuated element count");
    if (kern::ops().max_abs(h_act.val.data(), h_act.val.size()) >= 1.0)
        throw SimError("actuation signal |h| >= 1 would invert elements");
    return scatter_add_rows(t, h_act, mesh_->actuated, e);
}

struct FemSystem::ElemVars {
    DiffVar f00, f01, f10, f11; // deformation gradient entries
    DiffVar c, s, r;            // polar rotation cos/sin and |.|
    DiffVar area_act;           // actuated rest areas
    DiffVar b00, b01, b10, b11; // Dm_act^{-1}
};

FemSystem::ElemVars FemSystem::deformation(Tape& t, const DiffVar& q, const DiffVar& h_act) const {
    const int e = mesh_->n_tris();
    check(q.shape() == mesh_->rest.shape(), "elastic_force: q shape mismatch");

    DiffVar q0 = gather_rows(t, q, idx0_);
    DiffVar q1 = gather_rows(t, q, idx1_);
    DiffVar q2 = gather_rows(t, q, idx2_);
    DiffVar d1 = sub(t, q1, q0), d2 = sub(t, q2, q0);
    DiffVar d1x = crop(t, d1, 0, 1, 0, e, 0, 1), d1y = crop(t, d1, 0, 1, 0, e, 1, 1);
    DiffVar d2x = crop(t, d2, 0, 1, 0, e, 0, 1), d2y = crop(t, d2, 0, 1, 0, e, 1, 1);

    // actuation scales the rest shape along the body axis: Dm_act = diag(1+h,1) Dm,
    // so Dm_act^{-1} scales the first column of Dm^{-1} by 1/(1+h)
    DiffVar h_all = expand_actuation(t, h_act);
    DiffVar one_plus_h = add_scalar(t, h_all, 1.0);
    DiffVar inv_oph = div(t, constant(Tensor::full({1, e, 1}, 1.0)), one_plus_h);

    ElemVars ev;
    ev.b00 = mul(t, constant(dminv_[0]), inv_oph);
    ev.b01 = constant(dminv_[1]);
    ev.b10 = mul(t, constant(dminv_[2]), inv_oph);
    ev.b11 = constant(dminv_[3]);
    ev.area_act = mul(t, constant(area_), one_plus_h);

    // F = Ds * Dm_act^{-1}
    ev.f00 = add(t, mul(t, d1x, ev.b00), mul(t, d2x, ev.b10));
    ev.f01 = add(t, mul(t, d1x, ev.b01), mul(t, d2x, ev.b11));
    ev.f10 = add(t, mul(t, d1y, ev.b00), mul(t, d2y, ev.b10));
    ev.f11 = add(t, mul(t, d1y, ev.b01), mul(t, d2y, ev.b11));

    // inversion guard on det F
    {
        Tensor det = Tensor::uninit({1, e, 1});
        double* dp = det.raw();
        for (int i = 0; i < e; ++i)
            dp[i] = ev.f00.val.data()[i] * ev.f11.val.data()[i] -
                    ev.f01.val.data()[i] * ev.f10.val.data()[i];
        for (int i = 0; i < e; ++i)
            if (dp[i] <= 0.0)
                throw SimError("element inversion (det F <= 0) at element " + std::to_string(i));
    }

    // closed-form 2D polar decomposition: R = [[c,-s],[s,c]],
    // (c,s) = (f00+f11, f10-f01) / r
    DiffVar z0 = add(t, ev.f00, ev.f11);
    DiffVar z1 = sub(t, ev.f10, ev.f01);
    ev.r = vsqrt(t, add(t, mul(t, z0, z0), mul(t, z1, z1)));
    ev.c = div(t, z0, ev.r);
    ev.s = div(t, z1, ev.r);
    return ev;
}

DiffVar FemSystem::elastic_force(Tape& t, const DiffVar& q, const DiffVar& h_act) const {
    const int n = mesh_->n_nodes();
    ElemVars ev = deformation(t, q, h_act);

    // P = 2 mu (F - R) + lambda (tr(R^T F) - 2) R; tr(R^T F) = r
    const double mu2 = 2.0 * mat_.mu_s();
    DiffVar lam_tr = scale(t, add_scalar(t, ev.r, -2.0), mat_.lambda_s());
    DiffVar p00 = add(t, scale(t, sub(t, ev.f00, ev.c), mu2), mul(t, lam_tr, ev.c));
    DiffVar p01 = add(t, scale(t, add(t, ev.f01, ev.s), mu2), neg(t, mul(t, lam_tr, ev.s)));
    DiffVar p10 = add(t, scale(t, sub(t, ev.f10, ev.s), mu2), mul(t, lam_tr, ev.s));
    DiffVar p11 = add(t, scale(t, sub(t, ev.f11, ev.c), mu2), mul(t, lam_tr, ev.c));

    // nodal forces: H = -area P Dm_act^{-T}; f1 = H col0, f2 = H col1, f0 = -f1-f2
    DiffVar na = neg(t, ev.area_act);
    DiffVar h00 = mul(t, na, add(t, mul(t, p00, ev.b00), mul(t, p01, ev.b01)));
    DiffVar h10 = mul(t, na, add(t, mul(t, p10, ev.b00), mul(t, p11, ev.b01)));
    DiffVar h01 = mul(t, na, add(t, mul(t, p00, ev.b10), mul(t, p01, ev.b11)));
    DiffVar h11 = mul(t, na, add(t, mul(t, p10, ev.b10), mul(t, p11, ev.b11)));

    DiffVar f1 = concat_w(t, h00, h10);
    DiffVar f2 = concat_w(t, h01, h11);
    DiffVar f0 = neg(t, add(t, f1, f2));

    DiffVar out = scatter_add_rows(t, f0, idx0_, n);
    out = add(t, out, scatter_add_rows(t, f1, idx1_, n));
    out = add(t, out, scatter_add_rows(t, f2, idx2_, n));
    return out;
}

DiffVar FemSystem::elastic_energy(Tape& t, const DiffVar& q, const DiffVar& h_act) const {
    ElemVars ev = deformation(t, q, h_act);
    DiffVar e00 = sub(t, ev.f00, ev.c);
    DiffVar e01 = add(t, ev.f01, ev.s);
    DiffVar e10 = sub(t, ev.f10, ev.s);
    DiffVar e11 = sub(t, ev.f11, ev.c);
    DiffVar frob = add(t, add(t, mul(t, e00, e00), mul(t, e01, e01)),
                       add(t, mul(t, e10, e10), mul(t, e11, e11)));
    DiffVar tr = add_scalar(t, ev.r, -2.0);
    DiffVar psi = add(t, scale(t, frob, mat_.mu_s()), scale(t, mul(t, tr, tr), 0.5 * mat_.lambda_s()));
    return reduce_sum(t, mul(t, ev.area_act, psi));
}

SolidStateVar FemSystem::implicit_step(Tape& t, const SolidStateVar& s, const DiffVar& f_ext,
                                       const DiffVar& h_act, int iters, double damping,
                                       double* residual_out) const {
    check(iters >= 1, "implicit_step: solver iterations must be >= 1");
    const int n = mesh_->n_nodes();
    const double inv_h2 = 1.0 / (dt_ * dt_);
    DiffVar mass = constant(mass2_);

    DiffVar q_star = add(t, s.q, scale(t, s.qdot, dt_));
    DiffVar qk = q_star;
    Tensor last_residual;
    for (int it = 0; it < iters; ++it) {
        DiffVar f_int = elastic_force(t, qk, h_act);
        DiffVar r = sub(t, scale(t, mul(t, mass, sub(t, qk, q_star)), inv_h2), f_int);
        if (f_ext.val.defined()) r = sub(t, r, f_ext);
        if (rayleigh_ > 0.0) {
            // mass-proportional damping force -c M qdot_{t+1}
            DiffVar damp = scale(t, mul(t, mass, sub(t, qk, s.q)), rayleigh_ / dt_);
            r = add(t, r, damp);
        }
        last_residual = r.val;
        DiffVar delta = solve_spd(t, hess_, reshape(t, r, {1, 2 * n, 1}));
        qk = sub(t, qk, scale(t, reshape(t, delta, {1, n, 2}), damping));
    }
    if (residual_out)
        *residual_out = kern::ops().max_abs(last_residual.data(), last_residual.size());

    SolidStateVar out;
    out.q = qk;
    out.qdot = scale(t, sub(t, qk, s.q), 1.0 / dt_);
    return out;
}

} // namespace finflow::solid
