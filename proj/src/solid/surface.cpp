#include "finflow/solid/surface.hpp"

namespace finflow::solid {

using namespace ad;

couple::SurfaceGeometryVar surface_geometry(Tape& t, const DiffVar& q, const Mesh& mesh) {
    const int k = int(mesh.surface.size());
    check(k >= 3, "surface_geometry: surface loop too short");

    std::vector<int> next(mesh.surface.begin(), mesh.surface.end());
    std::rotate(next.begin(), next.begin() + 1, next.end()); // vertex k+1 (cyclic)
    std::vector<int> prev_of(std::size_t(k), 0);
    for (int i = 0; i < k; ++i) prev_of[std::size_t(i)] = (i + k - 1) % k;

    DiffVar pts = gather_rows(t, q, mesh.surface);
    DiffVar pts_next = gather_rows(t, q, next);
    DiffVar e = sub(t, pts_next, pts); // edge k: q_{k+1} - q_k
    DiffVar ex = crop(t, e, 0, 1, 0, k, 0, 1);
    DiffVar ey = crop(t, e, 0, 1, 0, k, 1, 1);
    // outward perpendicular for a CCW loop
    DiffVar edge_perp = concat_w(t, ey, neg(t, ex));

    DiffVar elen2 = rowsum_w(t, mul(t, e, e));
    for (int i = 0; i < k; ++i)
        if (elen2.val.data()[i] <= 0.0)
            throw SimError("surface_geometry: degenerate zero-length edge at " + std::to_string(i));
    DiffVar elen = vsqrt(t, elen2); // (1,K,1)

    DiffVar elen_prev = gather_rows(t, elen, prev_of);
    DiffVar lengths = scale(t, add(t, elen, elen_prev), 0.5);

    DiffVar n_edge = div(t, edge_perp, elen); // unit edge normals, w-broadcast divide
    DiffVar n_raw = add(t, n_edge, gather_rows(t, n_edge, prev_of));
    DiffVar n_len2 = rowsum_w(t, mul(t, n_raw, n_raw));
    for (int i = 0; i < k; ++i)
        if (n_len2.val.data()[i] <= 1e-24)
            throw SimError("surface_geometry: degenerate vertex normal at " + std::to_string(i));
    DiffVar normals = div(t, n_raw, vsqrt(t, n_len2));

    couple::SurfaceGeometryVar geo;
    geo.points = pts;
    geo.normals = normals;
    geo.lengths = lengths;
    geo.edge_perp = edge_perp;
    return geo;
}

} // namespace finflow::solid
