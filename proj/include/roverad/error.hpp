#pragma once

#include <stdexcept>
#include <string>

namespace roverad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV header or JSON document does not have the expected columns/fields.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A value is missing, unparsable or non-finite, or an input has the wrong shape.
class DataError : public Error {
public:
    using Error::Error;
};

/// Timestamps are not strictly increasing or not uniformly spaced.
class OrderingError : public DataError {
public:
    using DataError::DataError;
};

/// Persisted artifacts disagree with each other or with what the caller expects.
class ArtifactError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace roverad
