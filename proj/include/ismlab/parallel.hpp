// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace ismlab {

/// Runs body(0) .. body(count - 1) on at most `threads` workers (0 picks the
/// hardware concurrency). Jobs must write only to their own slots; the first
/// exception thrown by any job is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

} // namespace ismlab
