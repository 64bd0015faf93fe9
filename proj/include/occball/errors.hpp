#pragma once

#include <stdexcept>
#include <string>

namespace occball {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input.
class InputError : public Error {
public:
    using Error::Error;
};

/// Operation requested on a model shape it does not support (e.g. MIMO zeros).
class UnsupportedShape : public Error {
public:
    using Error::Error;
};

/// Frequency point sits on (or numerically next to) a pole.
class NearPoleError : public Error {
public:
    NearPoleError(const std::string& what, double zeta_re, double zeta_im)
        : Error(what), re(zeta_re), im(zeta_im) {}
    double re;
    double im;
};

/// Not enough regression rows for the requested fit.
class InsufficientData : public Error {
public:
    InsufficientData(const std::string& what, long required_rows, long available_rows)
        : Error(what), required(required_rows), available(available_rows) {}
    long required;
    long available;
};

/// Riccati / synthesis could not produce a stabilizing solution.
class SynthesisInfeasible : public Error {
public:
    using Error::Error;
};

/// Operation undefined for an unstable model (e.g. H-infinity norm).
class UnstableModel : public Error {
public:
    using Error::Error;
};

/// A training update produced non-finite values and was rejected.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace occball
