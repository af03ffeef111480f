#pragma once

#include <stdexcept>
#include <string>

namespace segedit {

// Values mirror the C API status codes in segedit/segedit.h.
enum class ErrorCode {
    InvalidArgument = 1,
    Io = 2,
    UnsupportedFormat = 3,
    DimensionMismatch = 4,
    InvalidLabels = 5,
    OutOfRange = 6,
    SpaceMismatch = 7,
    EmptyMask = 8,
    NonFinite = 9,
    CflViolation = 10,
    NotConverged = 11,
    SeedMismatch = 12,
    SegmentConsumed = 13,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace segedit
