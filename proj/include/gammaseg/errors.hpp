#pragma once

#include <stdexcept>
#include <string>

namespace gammaseg {

/// Base of every error raised by the library. Commands map these to a
/// one-line diagnostic and a nonzero exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// E empty or full: the discrete boundary is undefined.
class DegenerateSetError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

class AssumptionViolation : public Error {
public:
    AssumptionViolation(const std::string& what, double t) : Error(what), offending_t(t) {}
    double offending_t;
};

class ZeroMeasureError : public Error {
public:
    using Error::Error;
};

class CgDivergence : public Error {
public:
    CgDivergence(const std::string& what, double residual) : Error(what), residual(residual) {}
    double residual;
};

/// Support too large for the exact transport path with the fallback disabled.
class SizeLimitError : public Error {
public:
    using Error::Error;
};

class NoProgress : public Error {
public:
    using Error::Error;
};

class NonStationary : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace gammaseg
