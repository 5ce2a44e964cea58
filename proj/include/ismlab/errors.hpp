// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ismlab {

/// Invalid parameters, ranges or config documents.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Timestep or element index outside its valid range.
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Label not present in an oracle's label map.
struct LabelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise unusable input values.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mismatched vector/image dimensions.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure detected at runtime (non-finite gradients, failed
/// internal cross-checks).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ismlab
