#ifndef NEWTONFLOW_ERROR_HPP
#define NEWTONFLOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace newtonflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or mathematically inadmissible input (maps to CLI exit code 3).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Evaluation requested too close to a pole (or a zero, for log-type quantities).
class PoleProximity : public Error {
public:
    using Error::Error;
};

/// An iterative procedure failed to reach its tolerance.
class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// Adaptive integration step collapsed below the representable scale.
class StepUnderflow : public Error {
public:
    using Error::Error;
};

} // namespace newtonflow

#endif // NEWTONFLOW_ERROR_HPP
