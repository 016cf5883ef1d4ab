#pragma once

#include <stdexcept>
#include <string>

namespace ddw {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct IndexOutOfRange : Error {
    using Error::Error;
};

// Raised when a sample index falls in the tail of the final year and
// therefore has no forecast target.
struct SkipLastSample : Error {
    SkipLastSample(long long global_idx, int local_idx)
        : Error("skipping last sample: global_idx=" + std::to_string(global_idx) +
                ", local_idx=" + std::to_string(local_idx)),
          global_idx(global_idx), local_idx(local_idx) {}
    long long global_idx;
    int local_idx;
};

struct WindowOutOfBounds : Error {
    using Error::Error;
};

struct ZeroAnomalyNorm : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

} // namespace ddw
