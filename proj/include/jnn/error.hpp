#pragma once

#include <stdexcept>
#include <string>

namespace jnn {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or resolution mismatch between tensors/layers.
struct DimensionError : Error {
    using Error::Error;
};

/// Network construction failed (channel arithmetic, empty joint mask, ...).
struct BuildError : Error {
    using Error::Error;
};

/// Manifest, split or sampling problem.
struct DataError : Error {
    using Error::Error;
};

/// Metric computation on degenerate input.
struct MetricError : Error {
    using Error::Error;
};

/// Non-finite loss/gradient or other failure during optimization.
struct TrainError : Error {
    using Error::Error;
};

/// File decode/encode problem (png, checkpoint, config).
struct IoError : Error {
    using Error::Error;
};

}  // namespace jnn
