#pragma once

#include <stdexcept>
#include <string>

namespace dsscan {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad invocation: malformed options, inconsistent configuration.
struct UsageError : Error {
    using Error::Error;
};

// The input data cannot be analyzed as requested.
struct DataError : Error {
    using Error::Error;
};

// Numerical failure inside an otherwise valid computation.
struct NumericalError : Error {
    using Error::Error;
};

struct ParseError : DataError {
    using DataError::DataError;
};
struct RaggedAlignment : DataError {
    using DataError::DataError;
};
struct NotCodonAligned : DataError {
    using DataError::DataError;
};
struct InternalStop : DataError {
    using DataError::DataError;
};
struct DuplicateTaxon : DataError {
    using DataError::DataError;
};
struct FewerThanFourTaxa : DataError {
    using DataError::DataError;
};
struct TooFewTaxa : DataError {
    using DataError::DataError;
};
struct NoComparableSites : DataError {
    using DataError::DataError;
};
struct DegenerateHalf : DataError {
    using DataError::DataError;
};
struct AllWindowsDegenerate : DataError {
    using DataError::DataError;
};
struct WindowTooLong : UsageError {
    using UsageError::UsageError;
};
struct OutOfRange : UsageError {
    using UsageError::UsageError;
};
struct InvalidParameter : UsageError {
    using UsageError::UsageError;
};
struct ConfigError : UsageError {
    using UsageError::UsageError;
};
struct TaxaMismatch : DataError {
    using DataError::DataError;
};
struct TipMismatch : DataError {
    using DataError::DataError;
};
struct IoError : DataError {
    using DataError::DataError;
};
struct SingularDesign : NumericalError {
    using NumericalError::NumericalError;
};
struct NonFinite : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace dsscan
