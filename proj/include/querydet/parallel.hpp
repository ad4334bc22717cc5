#pragma once

namespace qd {

// Worker count used by the OpenMP kernels. 0 restores the runtime default.
void set_num_threads(int n);
int num_threads();

// Reads QD_THREADS (0 = auto) and applies it. Returns the effective count.
int configure_threads_from_env();

}  // namespace qd
