#pragma once

#include <stdexcept>
#include <string>

namespace prunebias {

/// Base for every error raised on bad input. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file structure (CSV shape, bad magic, bad header).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A cell holds a value outside its domain (non-binary label, score outside [0,1]).
class ValueError : public Error {
public:
    using Error::Error;
};

class UniquenessError : public Error {
public:
    using Error::Error;
};

/// Samples or attributes that cannot be matched by key.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Truncated binary payloads.
class LengthError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// Input is well formed but the quantity is undefined (zero denominator, single class).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

} // namespace prunebias
