#pragma once

#include <stdexcept>
#include <string>

namespace crmort {

// Exception hierarchy. The CLI maps each type onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files.
class IoError : public Error {
public:
    using Error::Error;
};

// Inputs that violate dataset or portfolio invariants.
class DataError : public Error {
public:
    using Error::Error;
};

// Settings that violate a module precondition.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Sampler reached a state it should never reach (non-finite posterior at the current point).
class SamplerError : public Error {
public:
    using Error::Error;
};

// Loss distribution lost more tail mass than tolerated.
class TruncationError : public Error {
public:
    using Error::Error;
};

} // namespace crmort
