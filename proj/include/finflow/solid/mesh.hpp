#pragma once

#include "finflow/core/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace finflow::solid {

struct Material {
    double youngs = 6e5;   // Pa
    double poisson = 0.45;
    double density = 100.0; // kg/m^3

    double mu_s() const { return youngs / (2.0 * (1.0 + poisson)); }
    double lambda_s() const {
        return youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    }
    void validate() const {
        check(youngs > 0.0, "Material: Young's modulus must be positive");
        check(poisson >= 0.0 && poisson < 0.5, "Material: Poisson ratio must be in [0, 0.5)");
        check(density > 0.0, "Material: density must be positive");
    }
};

// Triangulated 2D body. Triangles are CCW; the surface is a closed CCW loop
// of vertex indices. Actuated triangles carry a sign (top rows contract when
// bottom rows extend) and the longitudinal station X of their quad column.
struct Mesh {
    Tensor rest; // (1,N,2) rest positions, m
    std::vector<std::array<int, 3>> tris;
    std::vector<double> rest_area; // per triangle, m^2
    std::vector<int> surface;      // closed CCW vertex loop

    std::vector<int> actuated;       // triangle indices
    std::vector<double> act_sign;    // +1 top / -1 bottom
    std::vector<double> act_station; // X along the body, m

    int n_nodes() const { return rest.h(); }
    int n_tris() const { return int(tris.size()); }

    void validate() const;
    double signed_surface_area() const; // shoelace over the surface loop
    std::vector<double> lumped_mass(double rho) const;
};

void save_mesh_text(const Mesh& mesh, const std::string& path);
Mesh load_mesh_text(const std::string& path);

} // namespace finflow::solid
