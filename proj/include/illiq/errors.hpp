#pragma once

#include <stdexcept>
#include <string>

namespace illiq {

// Configuration text could not be parsed or has the wrong shape.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A parsed instance violates one of its invariants.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The cost function is not admissible (slope floor or marginal-cost monotonicity).
class CertificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An operation was called on a game outside its domain (e.g. a closed form
// requested for a nonlinear cost).
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace illiq
