#pragma once

#include <stdexcept>

namespace occuforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, missing mandatory CSV columns, invalid values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A persisted file (model container, occupancy CSV) could not be decoded.
class FormatError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace occuforge
