#pragma once

namespace robustnn {

// Execution policy for batch kernels. Parallel uses OpenMP worker threads;
// Serial is the reference path. Both produce bitwise-identical results:
// workers write disjoint output slots and reductions run in index order.
enum class Exec { Serial, Parallel };

}  // namespace robustnn
