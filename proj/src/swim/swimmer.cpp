#include "finflow/swim/swimmer.hpp"

#include <cmath>

namespace finflow::swim {

using namespace ad;

double envelope(double x, double length) {
    check(x >= 0.0 && x <= length, "envelope: X outside [0, L]");
    return (4.0 / (25.0 * length)) * x * x - (6.0 / 25.0) * x + length / 10.0;
}

double actuation_signal(double x, double t_now, const SwimmerSpec& spec, double omega) {
    check(t_now >= 0.0, "actuation_signal: t must be non-negative");
    const double gamma = spec.act.wave_number_for(spec.length);
    const double ramp = 1.0 - std::exp(-t_now / spec.act.activation_time);
    return spec.act.amplitude_c * envelope(x, spec.length) * std::sin(gamma * x + omega * t_now) * ramp;
}

double half_width(const SwimmerSpec& spec, double x) {
    const double s = 1.0 - x / spec.length; // profile is head-referenced
    const auto& a = spec.profile;
    double c = spec.length * (a[0] + s * (a[1] + s * (a[2] + s * a[3])));
    return std::max(c, spec.min_halfwidth_frac * spec.length);
}

solid::Mesh build_profile_mesh(const SwimmerSpec& spec) {
    spec.validate();
    const int rx = spec.res_x, ry = spec.res_y;
    const int cols = rx + 1, rows = ry + 1;
    auto node_id = [&](int i, int j) { return i * rows + j; };

    solid::Mesh mesh;
    Tensor rest = Tensor::uninit({1, cols * rows, 2});
    double* p = rest.raw();
    for (int i = 0; i < cols; ++i) {
        const double x = spec.length * double(i) / rx;
        const double c = half_width(spec, x);
        check(c > 0.0, "build_profile_mesh: degenerate zero-width column");
        for (int j = 0; j < rows; ++j) {
            const double y = -c + 2.0 * c * double(j) / ry;
            p[2 * node_id(i, j)] = x;
            p[2 * node_id(i, j) + 1] = y;
        }
    }
    mesh.rest = rest;

    for (int i = 0; i < rx; ++i)
        for (int j = 0; j < ry; ++j) {
            const int n00 = node_id(i, j), n10 = node_id(i + 1, j);
            const int n11 = node_id(i + 1, j + 1), n01 = node_id(i, j + 1);
            const int tri_base = int(mesh.tris.size());
            mesh.tris.push_back({n00, n10, n11});
            mesh.tris.push_back({n00, n11, n01});
            // actuated rows: top and bottom, excluding the end columns
            if ((j == 0 || j == ry - 1) && i > 0 && i < rx - 1) {
                const double station = spec.length * (i + 0.5) / rx;
                const double sign = (j == ry - 1) ? 1.0 : -1.0;
                for (int k = 0; k < 2; ++k) {
                    mesh.actuated.push_back(tri_base + k);
                    mesh.act_sign.push_back(sign);
                    mesh.act_station.push_back(station);
                }
            }
        }

    mesh.rest_area.resize(mesh.tris.size());
    for (std::size_t e = 0; e < mesh.tris.size(); ++e) {
        const auto& tr = mesh.tris[e];
        const double x0 = p[2 * tr[0]], y0 = p[2 * tr[0] + 1];
        const double x1 = p[2 * tr[1]], y1 = p[2 * tr[1] + 1];
        const double x2 = p[2 * tr[2]], y2 = p[2 * tr[2] + 1];
        mesh.rest_area[e] = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
        check(mesh.rest_area[e] > 0.0, "build_profile_mesh: inverted element");
    }

    // CCW surface loop: bottom left->right, right edge up, top right->left, left edge down
    for (int i = 0; i <= rx; ++i) mesh.surface.push_back(node_id(i, 0));
    for (int j = 1; j <= ry; ++j) mesh.surface.push_back(node_id(rx, j));
    for (int i = rx - 1; i >= 0; --i) mesh.surface.push_back(node_id(i, ry));
    for (int j = ry - 1; j >= 1; --j) mesh.surface.push_back(node_id(0, j));

    mesh.validate();
    return mesh;
}

DiffVar controller(Tape& t, const solid::Mesh& mesh, const SwimmerSpec& spec, const DiffVar& omega,
                   double t_now) {
    check(t_now >= 0.0, "controller: t must be non-negative");
    check(omega.val.size() == 1, "controller: omega must be scalar");
    const int n_act = int(mesh.actuated.size());
    if (n_act == 0) return DiffVar{};

    const double gamma = spec.act.wave_number_for(spec.length);
    Tensor amp = Tensor::uninit({1, n_act, 1});   // sign * C * v(X) * ramp
    Tensor phase0 = Tensor::uninit({1, n_act, 1}); // gamma * X
    const double ramp = 1.0 - std::exp(-t_now / spec.act.activation_time);
    for (int i = 0; i < n_act; ++i) {
        const double x = mesh.act_station[std::size_t(i)];
        amp.raw()[i] =
            mesh.act_sign[std::size_t(i)] * spec.act.amplitude_c * envelope(x, spec.length) * ramp;
        phase0.raw()[i] = gamma * x;
    }
    // h_k = amp_k * sin(gamma X_k + omega t)
    DiffVar wt = scale(t, omega, t_now);
    DiffVar phase = add(t, constant(phase0), wt);
    return mul(t, constant(amp), vsin(t, phase));
}

} // namespace finflow::swim
