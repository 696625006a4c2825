#pragma once

namespace cotmap {

/// Selects between the OpenMP kernel and its single-threaded reference path.
/// Both produce bit-identical results; only scheduling differs.
enum class Exec { Serial, Parallel };

/// Sets the OpenMP worker count used by Exec::Parallel kernels (<= 0 keeps the default).
void set_thread_count(int jobs);
int thread_count();

}  // namespace cotmap
