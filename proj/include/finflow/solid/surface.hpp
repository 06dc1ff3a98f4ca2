#pragma once

#include "finflow/couple/ibm.hpp"
#include "finflow/solid/mesh.hpp"

namespace finflow::solid {

// Per-surface-element geometry from current nodal positions, on the tape:
// q^k (vertex), l_k = half the summed adjacent edge lengths, n_k = the
// renormalized average of the two adjacent edge normals, plus the raw
// perpendicular edge vectors (whose loop sum telescopes to zero exactly).
couple::SurfaceGeometryVar surface_geometry(ad::Tape& t, const ad::DiffVar& q, const Mesh& mesh);

} // namespace finflow::solid
