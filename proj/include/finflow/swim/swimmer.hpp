#pragma once

#include "finflow/ad/ops.hpp"
#include "finflow/solid/mesh.hpp"

#include <array>

namespace finflow::swim {

// The body coordinate X runs from the tail (X=0) to the head (X=L): the
// actuation wave sin(gamma X + omega t) then travels head-to-tail and the
// envelope maximum sits at the tail, which is the carangiform gait. The
// profile polynomial is specified head-referenced (arc s measured from the
// head), so the mesh builder evaluates it at s = 1 - X/L.
struct ActuationSpec {
    double amplitude_c = 2.0;     // C, 1/m
    double wave_number = -1.0;    // gamma, rad/m; negative selects 2 pi / L
    double activation_time = 0.2; // t_a, s

    double wave_number_for(double length) const {
        return wave_number >= 0.0 ? wave_number : 2.0 * 3.14159265358979323846 / length;
    }
};

struct SwimmerSpec {
    double length = 0.2; // m
    std::array<double, 4> profile = {0.04, 0.26, -0.56, 0.28}; // c(s)/L, s from head
    double min_halfwidth_frac = 1e-3;
    int res_x = 40; // elements along the body
    int res_y = 8;  // elements across
    ActuationSpec act;

    void validate() const {
        check(length > 0.0, "SwimmerSpec: length must be positive");
        check(res_x >= 8 && res_y >= 4, "SwimmerSpec: mesh resolution must be at least 8x4");
        check(act.amplitude_c >= 0.0 && act.activation_time > 0.0,
              "SwimmerSpec: bad actuation constants");
    }
};

struct ControllerParams {
    double omega = 2.0 * 3.14159265358979323846 * 2.0; // rad/s, default 2 Hz
    void validate() const { check(omega > 0.0, "ControllerParams: omega must be positive"); }
};

// envelope of maximum lateral displacement, v(X) = 4/(25L) X^2 - 6/25 X + L/10
double envelope(double x, double length);

// h(X,t) = C v(X) sin(gamma X + omega t) (1 - exp(-t/t_a)), unsigned;
// the antagonistic top/bottom sign lives in the mesh actuator table
double actuation_signal(double x, double t_now, const SwimmerSpec& spec, double omega);

// half-width c at body coordinate X (tail-based; evaluates the
// head-referenced profile polynomial at 1 - X/L)
double half_width(const SwimmerSpec& spec, double x);

// structured quad mesh between y = +-c(X), split into CCW triangle pairs;
// top/bottom interior element rows are tagged as antagonistic actuators
solid::Mesh build_profile_mesh(const SwimmerSpec& spec);

// per-actuated-element signed actuation at time t_now, differentiable in omega
ad::DiffVar controller(ad::Tape& t, const solid::Mesh& mesh, const SwimmerSpec& spec,
                       const ad::DiffVar& omega, double t_now);

} // namespace finflow::swim
