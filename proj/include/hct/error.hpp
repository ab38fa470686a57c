#pragma once

#include <stdexcept>
#include <string>

namespace hct {

/// Base class for every error raised by the library. Anything deriving from
/// this is a data or validation problem (CLI exit code 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the offending line.
class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Merge schedule cannot be honoured (too few clusters left for m merges).
class ScheduleError : public Error {
public:
    using Error::Error;
};

/// PK sampling cannot fill an epoch.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// A hinge is active on a pair of coincident embeddings.
class GradientSingularityError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or parameters during training.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Bad configuration key or value type (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failure inside one pipeline stage; the message carries the iteration and stage.
class StageError : public Error {
public:
    using Error::Error;
};

}  // namespace hct
