// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace nerfcc {

// Global worker cap, set once by the CLI's --threads flag. 0 = hardware default.
void set_max_threads(int n);
int max_threads();

// Runs fn(chunk) for chunk in [0, n_chunks) on up to max_threads() workers.
// Chunk decomposition is fixed by the caller, so results are identical for any
// worker count; only wall time changes.
void parallel_chunks(int n_chunks, const std::function<void(int)>& fn);

}  // namespace nerfcc
