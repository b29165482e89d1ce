#pragma once

namespace platedg {

/// Serial kernels are the reference; parallel kernels split the cell and
/// edge loops across OpenMP threads and must agree to round-off.
enum class Execution { serial, parallel };

void set_num_threads(int n);
int num_threads();
bool openmp_enabled();

}  // namespace platedg
