#pragma once

#include <stdexcept>
#include <string>

namespace fusevid {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents or widths do not match an operation's contract.
struct ShapeError : Error {
    using Error::Error;
};

// Mixed or unsupported element types.
struct DtypeError : Error {
    using Error::Error;
};

// Malformed tensor file (bad magic, dtype code, truncation, trailing bytes).
struct FormatError : Error {
    using Error::Error;
};

// Invalid argument value (step counts, beta ranges, arm names, ...).
struct ParamError : Error {
    using Error::Error;
};

// Bad key, type, or value in a config file.
struct ConfigError : Error {
    using Error::Error;
};

// Embedding dump or record ingestion failed validation.
struct IngestError : Error {
    using Error::Error;
};

// A checked function produced a non-finite value.
struct EvalError : Error {
    using Error::Error;
};

// Gradient checking requires f64 inputs.
struct PrecisionError : Error {
    using Error::Error;
};

// Sequence exceeds a configured maximum extent.
struct CapacityError : Error {
    using Error::Error;
};

// Wrong number of items where a fixed count is required.
struct ArityError : Error {
    using Error::Error;
};

}  // namespace fusevid
