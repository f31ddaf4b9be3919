#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace c3o {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems with user-supplied files or values (CLI exit code 2).
class InputError : public Error {
public:
    using Error::Error;
};

class MalformedRow : public InputError {
public:
    MalformedRow(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    /// 1-based line number in the source text (the header is line 1).
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaMismatch : public InputError {
public:
    using InputError::InputError;
};

class PreconditionViolation : public InputError {
public:
    using InputError::InputError;
};

class EmptyTrainingSet : public Error {
public:
    EmptyTrainingSet() : Error("training set is empty") {}
};

/// No group of records shares every feature except the scale-out while
/// covering at least two distinct scale-outs.
class InsufficientScaleOutVariation : public Error {
public:
    using Error::Error;
};

class SchemaFingerprintMismatch : public Error {
public:
    using Error::Error;
};

class TooFewRecords : public Error {
public:
    using Error::Error;
};

class TooFewSplits : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NoUsableMachineType : public Error {
public:
    using Error::Error;
};

/// No scale-out meets the deadline at the requested confidence. Carries the
/// best achievable configuration so callers can report it.
class NoFeasibleScaleOut : public Error {
public:
    NoFeasibleScaleOut(int best_scale_out, double best_runtime_ms)
        : Error("no scale-out meets the deadline; best achievable is s=" +
                std::to_string(best_scale_out) + " at " +
                std::to_string(best_runtime_ms) + " ms including error margin"),
          best_scale_out_(best_scale_out),
          best_runtime_ms_(best_runtime_ms) {}

    int best_scale_out() const noexcept { return best_scale_out_; }
    double best_runtime_ms() const noexcept { return best_runtime_ms_; }

private:
    int best_scale_out_;
    double best_runtime_ms_;
};

}  // namespace c3o
