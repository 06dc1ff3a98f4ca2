#pragma once

#include "finflow/core/tensor.hpp"

#include <string>

namespace finflow {

// Field snapshot files: magic "FFSNAP1\n", dtype byte (0 = f64), u32 c/h/w
// little-endian, then row-major payload. CSV fallback writes one value per
// cell with a (c,j,i) index header.
void save_snapshot(const Tensor& t, const std::string& path);
Tensor load_snapshot(const std::string& path);
void save_snapshot_csv(const Tensor& t, const std::string& path);

} // namespace finflow
