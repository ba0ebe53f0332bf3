#pragma once

#include <stdexcept>
#include <string>

namespace csdelay {

/// Malformed or out-of-domain input to any routine in the library.
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A history lookup outside the stored window.
class OutOfWindowError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A root bracket on which the sign/predicate does not change.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All velocities equal: D(0) = 0, flocking holds trivially and the
/// critical delay recipe has nothing to bound.
class TrivialDatumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested horizon exceeds what a solver supports.
class HorizonError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace csdelay
