#pragma once

#include <cstddef>

namespace caudit {

// Execution policy for the data-parallel kernels. Every parallel kernel has a
// serial twin that produces bit-identical output; tests compare the two.
enum class Exec { Serial, Parallel };

// Process-wide thread cap for Exec::Parallel (0 = OpenMP default).
void set_max_threads(int n);
int max_threads();

// Threads a parallel region will actually use under the current cap.
int effective_threads(Exec exec);

}  // namespace caudit
