#include "finflow/solid/mesh.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace finflow::solid {

void Mesh::validate() const {
    check(rest.defined() && rest.c() == 1 && rest.w() == 2, "Mesh: rest positions must be (1,N,2)");
    check(rest_area.size() == tris.size(), "Mesh: per-element area count mismatch");
    for (std::size_t e = 0; e < tris.size(); ++e) {
        check(rest_area[e] > 0.0, "Mesh: non-positive rest area at element " + std::to_string(e));
        for (int v : tris[e]) check(v >= 0 && v < n_nodes(), "Mesh: triangle index out of range");
    }
    check(surface.size() >= 3, "Mesh: surface loop needs at least 3 vertices");
    check(signed_surface_area() > 0.0, "Mesh: surface loop must be counter-clockwise");
    check(actuated.size() == act_sign.size() && actuated.size() == act_station.size(),
          "Mesh: actuator annotation size mismatch");
}

double Mesh::signed_surface_area() const {
    double a = 0.0;
    const double* p = rest.data();
    const int k = int(surface.size());
    for (int i = 0; i < k; ++i) {
        int v0 = surface[std::size_t(i)], v1 = surface[std::size_t((i + 1) % k)];
        a += p[2 * v0] * p[2 * v1 + 1] - p[2 * v1] * p[2 * v0 + 1];
    }
    return 0.5 * a;
}

std::vector<double> Mesh::lumped_mass(double rho) const {
    std::vector<double> m(std::size_t(n_nodes()), 0.0);
    for (std::size_t e = 0; e < tris.size(); ++e) {
        double share = rho * rest_area[e] / 3.0;
        for (int v : tris[e]) m[std::size_t(v)] += share;
    }
    return m;
}

void save_mesh_text(const Mesh& mesh, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot write mesh file: " + path);
    f.precision(17);
    f << "finflow-mesh v1\n";
    f << "nodes " << mesh.n_nodes() << "\n";
    for (int i = 0; i < mesh.n_nodes(); ++i)
        f << mesh.rest.data()[2 * i] << " " << mesh.rest.data()[2 * i + 1] << "\n";
    f << "tris " << mesh.n_tris() << "\n";
    for (const auto& tr : mesh.tris) f << tr[0] << " " << tr[1] << " " << tr[2] << "\n";
    f << "surface " << mesh.surface.size() << "\n";
    for (int v : mesh.surface) f << v << "\n";
    f << "actuators " << mesh.actuated.size() << "\n";
    for (std::size_t i = 0; i < mesh.actuated.size(); ++i)
        f << mesh.actuated[i] << " " << mesh.act_sign[i] << " " << mesh.act_station[i] << "\n";
}

namespace {
std::string expect_tag(std::istream& in, const std::string& tag, const std::string& path) {
    std::string word;
    in >> word;
    check(in.good() && word == tag, "mesh file " + path + ": expected '" + tag + "', got '" + word + "'");
    std::string count;
    in >> count;
    return count;
}
} // namespace

Mesh load_mesh_text(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "cannot open mesh file: " + path);
    std::string header, version;
    f >> header >> version;
    check(header == "finflow-mesh" && version == "v1", "mesh file " + path + ": bad header");

    Mesh mesh;
    int n = std::stoi(expect_tag(f, "nodes", path));
    Tensor rest = Tensor::uninit({1, n, 2});
    for (int i = 0; i < n; ++i) f >> rest.raw()[2 * i] >> rest.raw()[2 * i + 1];
    mesh.rest = rest;

    int e = std::stoi(expect_tag(f, "tris", path));
    mesh.tris.resize(std::size_t(e));
    for (auto& tr : mesh.tris) f >> tr[0] >> tr[1] >> tr[2];

    int k = std::stoi(expect_tag(f, "surface", path));
    mesh.surface.resize(std::size_t(k));
    for (auto& v : mesh.surface) f >> v;

    int a = std::stoi(expect_tag(f, "actuators", path));
    mesh.actuated.resize(std::size_t(a));
    mesh.act_sign.resize(std::size_t(a));
    mesh.act_station.resize(std::size_t(a));
    for (int i = 0; i < a; ++i) f >> mesh.actuated[std::size_t(i)] >> mesh.act_sign[std::size_t(i)] >>
        mesh.act_station[std::size_t(i)];
    check(!f.fail(), "mesh file " + path + ": truncated");

    // recompute areas from rest positions
    mesh.rest_area.resize(mesh.tris.size());
    for (std::size_t t = 0; t < mesh.tris.size(); ++t) {
        const double* p = mesh.rest.data();
        auto& tr = mesh.tris[t];
        double x0 = p[2 * tr[0]], y0 = p[2 * tr[0] + 1];
        double x1 = p[2 * tr[1]], y1 = p[2 * tr[1] + 1];
        double x2 = p[2 * tr[2]], y2 = p[2 * tr[2] + 1];
        mesh.rest_area[t] = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
    }
    mesh.validate();
    return mesh;
}

} // namespace finflow::solid
