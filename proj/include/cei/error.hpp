// Copyright (C) 2026 The ceilens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cei {

/// Base class for every error raised by the library. The CLI maps each
/// subclass to a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model/experiment configuration (shape, range, divisibility).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
public:
    using Error::Error;
};

/// Sequence would exceed the model's max_seq.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or corrupt file (bad magic, version, hash, truncation, JSON).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Degenerate vectors for similarity measures (zero norm).
class DegenerateInputError : public InputError {
public:
    using InputError::InputError;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class ExperimentError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cei
