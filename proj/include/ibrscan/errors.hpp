#pragma once

#include <stdexcept>
#include <string>

namespace ibrscan {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, violated preconditions on parameters.
class ConfigError : public Error {
   public:
    using Error::Error;
};

// Simulation produced NaN/Inf or blew past a divergence bound.
class DivergenceError : public Error {
   public:
    using Error::Error;
};

class SteadyStateTimeout : public Error {
   public:
    using Error::Error;
};

class InfeasibleOperatingPoint : public Error {
   public:
    using Error::Error;
};

// Numerical linear algebra failure (ill-conditioned or rank-deficient systems).
class NumericalError : public Error {
   public:
    using Error::Error;
};

class IncompleteData : public Error {
   public:
    using Error::Error;
};

}  // namespace ibrscan
