// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace spx {

/// Execution policy for the data-parallel kernels. Parallel variants
/// partition work so that every output element is accumulated in a fixed
/// order by exactly one thread; results are therefore bit-identical to
/// kSerial for any thread count.
enum class Exec { kSerial, kParallel };

}  // namespace spx
